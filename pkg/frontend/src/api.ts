import { AttributeInfo, GenerateRequest, GenerateResponse } from "./types.js";

export class ApiError extends Error {
    readonly status: number;

    constructor(status: number, detail: string) {
        super(detail);
        this.status = status;
    }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin client over the HTTP API. At most one generate request is in flight:
 * submitting a new one aborts the previous (cancel-and-replace).
 */
export class ApiClient {
    readonly baseUrl: string;
    private readonly fetchFn: FetchLike;
    private inflight: AbortController | null = null;

    constructor(baseUrl = "", fetchFn?: FetchLike) {
        this.baseUrl = baseUrl.replace(/\/$/, "");
        this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    }

    private async parseError(response: Response): Promise<never> {
        let detail = `${response.status}`;
        try {
            const body = await response.json();
            if (body && typeof body.detail === "string") detail = body.detail;
        } catch {
            // non-JSON error body; keep the status text
        }
        throw new ApiError(response.status, detail);
    }

    async getAttributes(): Promise<AttributeInfo[]> {
        const response = await this.fetchFn(`${this.baseUrl}/api/attributes`);
        if (!response.ok) await this.parseError(response);
        const body = await response.json();
        return body.attributes as AttributeInfo[];
    }

    async generate(request: GenerateRequest): Promise<GenerateResponse> {
        this.inflight?.abort();
        const controller = new AbortController();
        this.inflight = controller;
        try {
            const response = await this.fetchFn(`${this.baseUrl}/api/generate`, {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify(request),
                signal: controller.signal,
            });
            if (!response.ok) await this.parseError(response);
            return (await response.json()) as GenerateResponse;
        } finally {
            if (this.inflight === controller) this.inflight = null;
        }
    }

    textureUrl(imageUrl: string): string {
        return imageUrl.startsWith("http") ? imageUrl : `${this.baseUrl}${imageUrl}`;
    }
}
