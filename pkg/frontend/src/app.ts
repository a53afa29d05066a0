/**
 * Review tool: shows each proposed segmentation over its image, lets the
 * expert correct it with brush / eraser / flood-fill (with undo/redo and an
 * opacity slider), submits the corrected mask, and charts the rule count as
 * the server evolves.
 */

import { ConflictError, SessionApi } from "./api.js";
import { RuleChart } from "./chart.js";
import { MaskLayer, Point, Tool } from "./mask.js";
import { bytesToBase64, encodeGrayPng } from "./png.js";

interface ActiveProposal {
    imageId: string;
    imagePixels: ImageData;
    mask: MaskLayer;
    inferred: number;
    ruleCount: number;
}

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

async function decodeToImageData(pngB64: string): Promise<ImageData> {
    const img = new Image();
    img.src = "data:image/png;base64," + pngB64;
    await img.decode();
    const canvas = document.createElement("canvas");
    canvas.width = img.naturalWidth;
    canvas.height = img.naturalHeight;
    const ctx = canvas.getContext("2d")!;
    ctx.drawImage(img, 0, 0);
    return ctx.getImageData(0, 0, canvas.width, canvas.height);
}

function maskFromImageData(data: ImageData): MaskLayer {
    const out = new Uint8Array(data.width * data.height);
    for (let i = 0; i < out.length; i++) {
        out[i] = data.data[i * 4] !== 0 ? 1 : 0;
    }
    return new MaskLayer(data.width, data.height, out);
}

export function maskToPngBase64(mask: MaskLayer): string {
    const gray = new Uint8Array(mask.data.length);
    for (let i = 0; i < gray.length; i++) gray[i] = mask.data[i] ? 255 : 0;
    return bytesToBase64(encodeGrayPng(mask.width, mask.height, gray));
}

class ReviewApp {
    private api: SessionApi;
    private sessionId = "";
    private active: ActiveProposal | null = null;
    private tool: Tool = "brush";
    private radius = 4;
    private opacity = 0.45;
    private sideBySide = false;
    private strokePoints: Point[] = [];
    private drawing = false;
    private chart = new RuleChart(el<HTMLCanvasElement>("chart"));
    private submitting = false;

    constructor() {
        this.api = new SessionApi("");
    }

    async start(): Promise<void> {
        const params = new URLSearchParams(location.search);
        try {
            const created = await this.api.createSession(
                params.get("dataset") ?? undefined,
                params.get("bundle") ?? undefined,
            );
            this.sessionId = created.session_id;
            this.status(`session ${this.sessionId.slice(0, 8)} with ${created.queued} images queued`);
        } catch (err) {
            this.status(`could not create a session: ${(err as Error).message}`, true);
            return;
        }
        this.wireControls();
        await this.loadNext();
    }

    private wireControls(): void {
        for (const t of ["brush", "eraser", "flood_fill"] as Tool[]) {
            el<HTMLButtonElement>(`tool-${t}`).onclick = () => {
                this.tool = t;
                this.refreshToolbar();
            };
        }
        el<HTMLInputElement>("radius").oninput = (e) => {
            this.radius = Number((e.target as HTMLInputElement).value);
        };
        el<HTMLInputElement>("opacity").oninput = (e) => {
            this.opacity = Number((e.target as HTMLInputElement).value) / 100;
            this.render();
        };
        el<HTMLButtonElement>("undo").onclick = () => {
            this.active?.mask.undo();
            this.render();
        };
        el<HTMLButtonElement>("redo").onclick = () => {
            this.active?.mask.redo();
            this.render();
        };
        el<HTMLButtonElement>("side").onclick = () => {
            this.sideBySide = !this.sideBySide;
            this.render();
        };
        el<HTMLButtonElement>("submit").onclick = () => void this.submit();
        el<HTMLButtonElement>("reload").onclick = () => void this.loadNext();

        const canvas = el<HTMLCanvasElement>("editor");
        canvas.onpointerdown = (e) => {
            if (!this.active) return;
            this.drawing = true;
            this.strokePoints = [this.canvasPoint(e)];
            canvas.setPointerCapture(e.pointerId);
        };
        canvas.onpointermove = (e) => {
            if (!this.drawing || !this.active) return;
            this.strokePoints.push(this.canvasPoint(e));
            this.render(this.strokePoints);
        };
        canvas.onpointerup = () => {
            if (!this.drawing || !this.active) return;
            this.drawing = false;
            this.active.mask.applyStroke(this.tool, this.strokePoints, this.radius);
            this.strokePoints = [];
            this.render();
        };
        this.refreshToolbar();
    }

    private canvasPoint(e: PointerEvent): Point {
        const canvas = el<HTMLCanvasElement>("editor");
        const rect = canvas.getBoundingClientRect();
        return {
            x: ((e.clientX - rect.left) / rect.width) * canvas.width,
            y: ((e.clientY - rect.top) / rect.height) * canvas.height,
        };
    }

    private refreshToolbar(): void {
        for (const t of ["brush", "eraser", "flood_fill"]) {
            el(`tool-${t}`).classList.toggle("active", this.tool === t);
        }
    }

    private status(text: string, isError = false): void {
        const bar = el("status");
        bar.textContent = text;
        bar.classList.toggle("error", isError);
    }

    async loadNext(): Promise<void> {
        el("conflict").hidden = true;
        let next;
        try {
            next = await this.api.next(this.sessionId);
        } catch (err) {
            // keep local edits and offer a retry
            el("conflict").hidden = false;
            this.status(`network problem, edits kept: ${(err as Error).message}`, true);
            return;
        }
        if (next.status === "complete") {
            this.active = null;
            await this.showSummary();
            return;
        }
        const imagePixels = await decodeToImageData(next.image_png!);
        const proposal = maskFromImageData(await decodeToImageData(next.proposal_png!));
        this.active = {
            imageId: next.image_id!,
            imagePixels,
            mask: proposal,
            inferred: next.inferred_param!,
            ruleCount: next.rule_count!,
        };
        el("meta").textContent =
            `${next.image_id}  parameter ${next.inferred_param!.toFixed(4)}  ` +
            `rules ${next.rule_count}  remaining ${next.remaining}`;
        this.render();
        this.status("ready; correct the overlay and submit");
    }

    private render(previewStroke: Point[] = []): void {
        const active = this.active;
        if (!active) return;
        const canvas = el<HTMLCanvasElement>("editor");
        const { width, height } = active.imagePixels;
        canvas.width = this.sideBySide ? width * 2 + 4 : width;
        canvas.height = height;
        const ctx = canvas.getContext("2d")!;
        ctx.putImageData(active.imagePixels, 0, 0);
        const overlay = ctx.createImageData(width, height);
        const mask = active.mask;
        for (let i = 0; i < mask.data.length; i++) {
            if (mask.data[i]) {
                overlay.data[i * 4] = 255;
                overlay.data[i * 4 + 1] = 60;
                overlay.data[i * 4 + 2] = 0;
                overlay.data[i * 4 + 3] = Math.round(this.opacity * 255);
            }
        }
        const buffer = document.createElement("canvas");
        buffer.width = width;
        buffer.height = height;
        buffer.getContext("2d")!.putImageData(overlay, 0, 0);
        ctx.drawImage(buffer, 0, 0);
        if (previewStroke.length && this.tool !== "flood_fill") {
            ctx.strokeStyle = this.tool === "brush" ? "rgba(255,80,0,0.9)" : "rgba(0,120,255,0.9)";
            ctx.lineWidth = this.radius * 2;
            ctx.lineCap = "round";
            ctx.beginPath();
            previewStroke.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
            ctx.stroke();
        }
        if (this.sideBySide) {
            const plain = document.createElement("canvas");
            plain.width = width;
            plain.height = height;
            plain.getContext("2d")!.putImageData(active.imagePixels, 0, 0);
            ctx.drawImage(plain, width + 4, 0);
        }
    }

    async submit(): Promise<void> {
        const active = this.active;
        if (!active || this.submitting) return;
        this.submitting = true;
        const button = el<HTMLButtonElement>("submit");
        button.disabled = true;
        try {
            const result = await this.api.submitFeedback(
                this.sessionId,
                active.imageId,
                maskToPngBase64(active.mask),
            );
            this.chart.append(result.rule_count);
            const stats = await this.api.ruleStats(this.sessionId);
            this.chart.syncWith(stats.trajectory);
            this.status(
                `accepted parameter ${result.accepted_param.toFixed(4)}, ` +
                    `overlap ${result.proposal_jaccard.toFixed(3)}, rules ${result.rule_count}`,
            );
            await this.loadNext();
        } catch (err) {
            if (err instanceof ConflictError) {
                el("conflict").hidden = false;
                this.status(`submission conflict: ${err.message}`, true);
            } else {
                this.status(`submit failed, edits kept: ${(err as Error).message}`, true);
            }
        } finally {
            this.submitting = false;
            button.disabled = false;
        }
    }

    private async showSummary(): Promise<void> {
        const log = await this.api.log(this.sessionId);
        const rows = log.entries
            .map(
                (e) =>
                    `<tr><td>${e.image_id}</td><td>${e.inferred.toFixed(4)}</td>` +
                    `<td>${e.accepted_param.toFixed(4)}</td>` +
                    `<td>${e.proposal_jaccard.toFixed(3)}</td><td>${e.rule_count}</td></tr>`,
            )
            .join("");
        el("summary").innerHTML =
            "<h2>stream complete</h2><table><tr><th>image</th><th>inferred</th>" +
            "<th>accepted</th><th>overlap</th><th>rules</th></tr>" +
            rows +
            "</table>";
        el("summary").hidden = false;
        el("workspace").hidden = true;
        this.status(`reviewed ${log.entries.length} images`);
    }
}

if (typeof document !== "undefined" && document.getElementById("editor")) {
    void new ReviewApp().start();
}
