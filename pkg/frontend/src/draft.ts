import { GenerateRequest, GenerateResponse, HistoryEntry } from "./types.js";

function clamp01(v: number): number {
    if (Number.isNaN(v)) return 0;
    return Math.min(1, Math.max(0, v));
}

/**
 * The in-progress query: attribute values plus the request options that will
 * be sent with it. History entries store the exact request body that went
 * out, so restoring an entry and rebuilding the body is lossless.
 */
export class QueryDraft {
    private values = new Map<string, number>();
    readonly vocabulary: string[];
    size?: number;
    topK?: number;

    constructor(vocabulary: string[]) {
        this.vocabulary = [...vocabulary];
    }

    set(name: string, value: number): void {
        if (!this.vocabulary.includes(name)) {
            throw new Error(`unknown attribute: ${name}`);
        }
        const v = clamp01(value);
        if (v > 0) {
            this.values.set(name, v);
        } else {
            this.values.delete(name);
        }
    }

    get(name: string): number {
        return this.values.get(name) ?? 0;
    }

    activeAttributes(): string[] {
        return this.vocabulary.filter((n) => this.get(n) > 0);
    }

    canSubmit(): boolean {
        return this.values.size > 0;
    }

    clear(): void {
        this.values.clear();
    }

    /** Request body with attributes in vocabulary order (deterministic). */
    buildRequest(): GenerateRequest {
        const attributes: Record<string, number> = {};
        for (const name of this.vocabulary) {
            const v = this.get(name);
            if (v > 0) attributes[name] = v;
        }
        const req: GenerateRequest = { attributes };
        if (this.size !== undefined) req.size = this.size;
        if (this.topK !== undefined) req.top_k = this.topK;
        return req;
    }

    /** Reset the draft to exactly the state captured by a history entry. */
    restore(entry: HistoryEntry): void {
        this.values.clear();
        for (const [name, v] of Object.entries(entry.request.attributes)) {
            this.set(name, v);
        }
        this.size = entry.request.size;
        this.topK = entry.request.top_k;
    }
}

/** Append-only log of submitted queries and their results. */
export class History {
    private entries: HistoryEntry[] = [];

    add(request: GenerateRequest, response: GenerateResponse, at = Date.now()): HistoryEntry {
        const entry: HistoryEntry = {
            request: JSON.parse(JSON.stringify(request)),
            response,
            at,
        };
        this.entries.push(entry);
        return entry;
    }

    all(): readonly HistoryEntry[] {
        return this.entries;
    }

    get length(): number {
        return this.entries.length;
    }

    at(index: number): HistoryEntry {
        const e = this.entries[index];
        if (!e) throw new Error(`no history entry at index ${index}`);
        return e;
    }
}
