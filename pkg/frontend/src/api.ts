/**
 * Typed client for the review service. All mutation goes through
 * submitFeedback; everything else is a read.
 */

export interface NextProposal {
    status: "ok" | "complete";
    image_id?: string;
    image_png?: string;
    proposal_png?: string;
    inferred_param?: number;
    rule_count?: number;
    remaining?: number;
    processed?: number;
}

export interface FeedbackResult {
    accepted_param: number;
    rule_count: number;
    proposal_jaccard: number;
    remaining: number;
}

export interface LogEntry {
    image_id: string;
    inferred: number;
    proposal_jaccard: number;
    accepted_param: number;
    rule_count: number;
}

export interface RuleStats {
    current: number;
    trajectory: number[];
    processed: number;
    remaining: number;
}

export class ConflictError extends Error {
    constructor(detail: string) {
        super(detail);
        this.name = "ConflictError";
    }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
    constructor(
        private baseUrl: string,
        private fetchFn: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const res = await this.fetchFn(this.baseUrl + path, init);
        if (res.status === 409) {
            const body = await res.json().catch(() => ({ detail: "conflict" }));
            throw new ConflictError(body.detail ?? "conflict");
        }
        if (!res.ok) {
            const body = await res.json().catch(() => ({ detail: res.statusText }));
            throw new Error(`${res.status}: ${body.detail ?? res.statusText}`);
        }
        return (await res.json()) as T;
    }

    createSession(dataset?: string, bundle?: string): Promise<{ session_id: string; queued: number }> {
        return this.request("/sessions", {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ dataset, bundle }),
        });
    }

    next(sessionId: string): Promise<NextProposal> {
        return this.request(`/sessions/${sessionId}/next`);
    }

    submitFeedback(sessionId: string, imageId: string, maskPngB64: string): Promise<FeedbackResult> {
        return this.request(`/sessions/${sessionId}/feedback`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ image_id: imageId, mask_png: maskPngB64 }),
        });
    }

    log(sessionId: string): Promise<{ entries: LogEntry[] }> {
        return this.request(`/sessions/${sessionId}/log`);
    }

    ruleStats(sessionId: string): Promise<RuleStats> {
        return this.request(`/sessions/${sessionId}/rules/stats`);
    }
}
