/**
 * Editable binary mask layer: brush, eraser and flood-fill toggling of
 * 4-connected components, with a bounded undo/redo history.
 *
 * The layer is DOM-free so it can be exercised under node; pixel values are
 * 0 (background) and 1 (object), row-major.
 */

export type Tool = "brush" | "eraser" | "flood_fill";

export interface Point {
    x: number;
    y: number;
}

const UNDO_LIMIT = 50; // must stay >= 20 per the review-tool contract

export class MaskLayer {
    readonly width: number;
    readonly height: number;
    data: Uint8Array;
    private undoStack: Uint8Array[] = [];
    private redoStack: Uint8Array[] = [];

    constructor(width: number, height: number, data?: Uint8Array) {
        if (width < 1 || height < 1) {
            throw new Error("mask dimensions must be positive");
        }
        this.width = width;
        this.height = height;
        if (data !== undefined && data.length !== width * height) {
            throw new Error("data length does not match dimensions");
        }
        this.data = data ? Uint8Array.from(data, (v) => (v ? 1 : 0)) : new Uint8Array(width * height);
    }

    clone(): MaskLayer {
        return new MaskLayer(this.width, this.height, this.data);
    }

    count(): number {
        let n = 0;
        for (const v of this.data) n += v;
        return n;
    }

    equals(other: MaskLayer): boolean {
        if (other.width !== this.width || other.height !== this.height) return false;
        for (let i = 0; i < this.data.length; i++) {
            if (this.data[i] !== other.data[i]) return false;
        }
        return true;
    }

    get(x: number, y: number): number {
        if (x < 0 || y < 0 || x >= this.width || y >= this.height) return 0;
        return this.data[y * this.width + x];
    }

    private snapshot(): void {
        this.undoStack.push(this.data.slice());
        if (this.undoStack.length > UNDO_LIMIT) this.undoStack.shift();
        this.redoStack.length = 0;
    }

    get undoDepth(): number {
        return this.undoStack.length;
    }

    undo(): boolean {
        const prev = this.undoStack.pop();
        if (!prev) return false;
        this.redoStack.push(this.data);
        this.data = prev;
        return true;
    }

    redo(): boolean {
        const next = this.redoStack.pop();
        if (!next) return false;
        this.undoStack.push(this.data);
        this.data = next;
        return true;
    }

    /** One stroke = one undo step; out-of-bounds samples clip silently. */
    applyStroke(tool: Tool, points: Point[], radius = 3): void {
        if (points.length === 0) return;
        this.snapshot();
        if (tool === "flood_fill") {
            const p = points[0];
            this.floodToggle(Math.round(p.x), Math.round(p.y));
            return;
        }
        const value = tool === "brush" ? 1 : 0;
        for (const p of points) {
            this.stamp(Math.round(p.x), Math.round(p.y), radius, value);
        }
    }

    private stamp(cx: number, cy: number, radius: number, value: number): void {
        const r2 = radius * radius;
        const x0 = Math.max(0, cx - radius);
        const x1 = Math.min(this.width - 1, cx + radius);
        const y0 = Math.max(0, cy - radius);
        const y1 = Math.min(this.height - 1, cy + radius);
        for (let y = y0; y <= y1; y++) {
            for (let x = x0; x <= x1; x++) {
                const dx = x - cx;
                const dy = y - cy;
                if (dx * dx + dy * dy <= r2) {
                    this.data[y * this.width + x] = value;
                }
            }
        }
    }

    /** Invert the 4-connected component under (x, y). */
    private floodToggle(x: number, y: number): void {
        if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
        const target = this.data[y * this.width + x];
        const replacement = target ? 0 : 1;
        const stack = [y * this.width + x];
        const w = this.width;
        const seen = new Uint8Array(this.data.length);
        while (stack.length) {
            const idx = stack.pop()!;
            if (seen[idx] || this.data[idx] !== target) continue;
            seen[idx] = 1;
            this.data[idx] = replacement;
            const px = idx % w;
            if (px > 0) stack.push(idx - 1);
            if (px + 1 < w) stack.push(idx + 1);
            if (idx - w >= 0) stack.push(idx - w);
            if (idx + w < this.data.length) stack.push(idx + w);
        }
    }
}
