import { inflateSync } from "node:zlib";

import { describe, expect, it } from "vitest";

import { ConflictError, SessionApi } from "../src/api.js";
import { RuleChart } from "../src/chart.js";
import { MaskLayer } from "../src/mask.js";
import { base64ToBytes, bytesToBase64, decodePng, encodeGrayPng } from "../src/png.js";

const inflate = (data: Uint8Array) => new Uint8Array(inflateSync(data));

function maskToPngBase64(mask: MaskLayer): string {
    const gray = new Uint8Array(mask.data.length);
    for (let i = 0; i < gray.length; i++) gray[i] = mask.data[i] ? 255 : 0;
    return bytesToBase64(encodeGrayPng(mask.width, mask.height, gray));
}

/** Tiny in-memory stand-in for the review service. */
function mockService() {
    const width = 6;
    const height = 4;
    const proposalMask = new MaskLayer(width, height);
    proposalMask.applyStroke("brush", [{ x: 2, y: 2 }], 1);
    const proposalB64 = maskToPngBase64(proposalMask);
    const state = {
        queue: ["im0", "im1"],
        trajectory: [] as number[],
        submissions: [] as { image_id: string; mask_png: string }[],
    };

    const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
        const respond = (status: number, body: unknown) =>
            new Response(JSON.stringify(body), { status });
        if (url.endsWith("/sessions") && init?.method === "POST") {
            return respond(200, { session_id: "s1", queued: state.queue.length });
        }
        if (url.endsWith("/next")) {
            if (state.queue.length === 0) {
                return respond(200, { status: "complete", processed: state.submissions.length });
            }
            return respond(200, {
                status: "ok",
                image_id: state.queue[0],
                image_png: proposalB64,
                proposal_png: proposalB64,
                inferred_param: 0.42,
                rule_count: 5 + state.submissions.length,
                remaining: state.queue.length,
            });
        }
        if (url.endsWith("/feedback") && init?.method === "POST") {
            const body = JSON.parse(String(init.body)) as { image_id: string; mask_png: string };
            if (state.queue[0] !== body.image_id) {
                return respond(409, { detail: `expected ${state.queue[0]}` });
            }
            // server-side decode: must be pixel-identical to what the UI edited
            const decoded = decodePng(base64ToBytes(body.mask_png), inflate);
            if (decoded.width !== width || decoded.height !== height) {
                return respond(422, { detail: "dimension mismatch" });
            }
            state.queue.shift();
            state.submissions.push(body);
            const ruleCount = 5 + state.submissions.length;
            state.trajectory.push(ruleCount);
            let identical = true;
            for (let i = 0; i < proposalMask.data.length; i++) {
                if ((decoded.gray[i] !== 0 ? 1 : 0) !== proposalMask.data[i]) identical = false;
            }
            return respond(200, {
                accepted_param: 0.4,
                rule_count: ruleCount,
                proposal_jaccard: identical ? 1.0 : 0.5,
                remaining: state.queue.length,
            });
        }
        if (url.endsWith("/rules/stats")) {
            return respond(200, {
                current: 5 + state.submissions.length,
                trajectory: state.trajectory,
                processed: state.submissions.length,
                remaining: state.queue.length,
            });
        }
        if (url.endsWith("/log")) {
            return respond(200, { entries: state.submissions });
        }
        return respond(404, { detail: "unknown route" });
    };
    return { fetchFn, state, proposalMask, proposalB64 };
}

describe("session flow", () => {
    it("untouched proposal submits pixel-identically and scores 1.0", async () => {
        const svc = mockService();
        const api = new SessionApi("", svc.fetchFn);
        const { session_id } = await api.createSession();
        const next = await api.next(session_id);
        expect(next.status).toBe("ok");

        // decode the proposal like the browser would, then re-encode untouched
        const decoded = decodePng(base64ToBytes(next.proposal_png!), inflate);
        const layer = new MaskLayer(decoded.width, decoded.height,
            Uint8Array.from(decoded.gray, (v) => (v !== 0 ? 1 : 0)));
        const result = await api.submitFeedback(session_id, next.image_id!, maskToPngBase64(layer));
        expect(result.proposal_jaccard).toBe(1.0);
    });

    it("edited masks round-trip losslessly through the wire format", async () => {
        const svc = mockService();
        const api = new SessionApi("", svc.fetchFn);
        const { session_id } = await api.createSession();
        const next = await api.next(session_id);
        const decoded = decodePng(base64ToBytes(next.proposal_png!), inflate);
        const layer = new MaskLayer(decoded.width, decoded.height,
            Uint8Array.from(decoded.gray, (v) => (v !== 0 ? 1 : 0)));
        layer.applyStroke("brush", [{ x: 5, y: 3 }], 1);
        await api.submitFeedback(session_id, next.image_id!, maskToPngBase64(layer));
        const wire = svc.state.submissions[0].mask_png;
        const back = decodePng(base64ToBytes(wire), inflate);
        expect(Array.from(back.gray, (v) => (v !== 0 ? 1 : 0))).toEqual(Array.from(layer.data));
    });

    it("conflicts surface as ConflictError", async () => {
        const svc = mockService();
        const api = new SessionApi("", svc.fetchFn);
        const { session_id } = await api.createSession();
        await expect(
            api.submitFeedback(session_id, "stale-image", svc.proposalB64),
        ).rejects.toBeInstanceOf(ConflictError);
    });

    it("rule chart appends and matches rules/stats after each submission", async () => {
        const svc = mockService();
        const api = new SessionApi("", svc.fetchFn);
        const chart = new RuleChart(null);
        const { session_id } = await api.createSession();
        for (;;) {
            const next = await api.next(session_id);
            if (next.status === "complete") break;
            const result = await api.submitFeedback(session_id, next.image_id!, svc.proposalB64);
            chart.append(result.rule_count);
            const stats = await api.ruleStats(session_id);
            expect(chart.syncWith(stats.trajectory)).toBe(true);
            expect(chart.values()).toEqual(stats.trajectory);
        }
        expect(chart.values().length).toBe(2);
    });
});
