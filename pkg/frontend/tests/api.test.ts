import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Recorded {
    input: string;
    init?: RequestInit;
}

function jsonResponse(body: unknown, status = 200): Response {
    return new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
    });
}

describe("ApiClient", () => {
    it("fetches and unwraps the attribute list", async () => {
        const calls: Recorded[] = [];
        const client = new ApiClient("http://api.test", async (input, init) => {
            calls.push({ input, init });
            return jsonResponse({
                attributes: [{ name: "irregular", index: 0, axis: "X" }],
            });
        });
        const attrs = await client.getAttributes();
        expect(calls[0].input).toBe("http://api.test/api/attributes");
        expect(attrs).toEqual([{ name: "irregular", index: 0, axis: "X" }]);
    });

    it("posts the exact request body as JSON", async () => {
        const calls: Recorded[] = [];
        const client = new ApiClient("", async (input, init) => {
            calls.push({ input, init });
            return jsonResponse({ image_url: "/api/texture/x.png" });
        });
        const request = { attributes: { grid: 0.9, uniform: 0.25 }, top_k: 3 };
        await client.generate(request);
        expect(calls[0].input).toBe("/api/generate");
        expect(calls[0].init?.method).toBe("POST");
        expect(calls[0].init?.body).toBe(JSON.stringify(request));
    });

    it("aborts the previous in-flight generate (cancel-and-replace)", async () => {
        const signals: AbortSignal[] = [];
        let release: (() => void) | undefined;
        const client = new ApiClient("", async (_input, init) => {
            signals.push(init!.signal!);
            if (signals.length === 1) {
                await new Promise<void>((resolve) => (release = resolve));
            }
            return jsonResponse({ ok: true });
        });
        const first = client.generate({ attributes: { grid: 0.5 } });
        const second = client.generate({ attributes: { grid: 0.6 } });
        expect(signals[0].aborted).toBe(true);
        expect(signals[1].aborted).toBe(false);
        release?.();
        await Promise.allSettled([first, second]);
    });

    it("throws ApiError carrying the server detail", async () => {
        const client = new ApiClient("", async () =>
            jsonResponse({ detail: "unknown attribute name: 'sparkly'" }, 400),
        );
        await expect(
            client.generate({ attributes: { sparkly: 1 } }),
        ).rejects.toThrowError(ApiError);
        await expect(
            client.generate({ attributes: { sparkly: 1 } }),
        ).rejects.toThrow(/sparkly/);
    });

    it("resolves texture urls against the base", () => {
        const client = new ApiClient("http://api.test/");
        expect(client.textureUrl("/api/texture/a.png")).toBe(
            "http://api.test/api/texture/a.png",
        );
        expect(client.textureUrl("http://cdn/x.png")).toBe("http://cdn/x.png");
    });
});
