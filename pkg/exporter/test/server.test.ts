import type * as http from "node:http";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HashProjectionEncoder } from "../src/encoder.js";
import { createServer, listen, MAX_TEXTS_PER_REQUEST } from "../src/server.js";

const encoder = new HashProjectionEncoder(24);
let server: http.Server;
let base: string;

beforeAll(async () => {
  server = createServer(encoder);
  const port = await listen(server, 0);
  base = `http://127.0.0.1:${port}`;
});

afterAll(() => {
  server.close();
});

async function post(body: string): Promise<Response> {
  return fetch(`${base}/embed`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body,
  });
}

describe("embedding provider server", () => {
  it("returns one vector per text, in order", async () => {
    const texts = ["alpha", "beta", "alpha"];
    const res = await post(JSON.stringify({ texts }));
    expect(res.status).toBe(200);
    const payload = (await res.json()) as { dim: number; vectors: number[][] };
    expect(payload.dim).toBe(24);
    expect(payload.vectors).toHaveLength(3);
    const want = encoder.encode(texts);
    for (let i = 0; i < texts.length; i++) {
      expect(payload.vectors[i]).toEqual(Array.from(want[i]));
    }
    // Identical texts get identical vectors.
    expect(payload.vectors[0]).toEqual(payload.vectors[2]);
  });

  it("handles an empty batch", async () => {
    const res = await post(JSON.stringify({ texts: [] }));
    expect(res.status).toBe(200);
    const payload = (await res.json()) as { dim: number; vectors: number[][] };
    expect(payload.vectors).toEqual([]);
  });

  it("rejects oversized batches with 400", async () => {
    const texts = Array.from({ length: MAX_TEXTS_PER_REQUEST + 1 }, (_, i) => `t${i}`);
    const res = await post(JSON.stringify({ texts }));
    expect(res.status).toBe(400);
    const payload = (await res.json()) as { error: string };
    expect(payload.error).toContain(String(MAX_TEXTS_PER_REQUEST));
  });

  it("rejects malformed JSON with 400", async () => {
    const res = await post("{not json");
    expect(res.status).toBe(400);
  });

  it("rejects a missing or ill-typed texts field with 400", async () => {
    for (const body of ["{}", '{"texts": "hello"}', '{"texts": [1, 2]}', "[1,2]"]) {
      const res = await post(body);
      expect(res.status, body).toBe(400);
    }
  });

  it("rejects non-POST methods with 405", async () => {
    const res = await fetch(`${base}/embed`);
    expect(res.status).toBe(405);
  });
});
