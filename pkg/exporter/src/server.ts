/**
 * HTTP embedding provider.
 *
 * Implements the endpoint contract the Python toolkit's HttpProvider
 * consumes: POST any path with body {"texts": ["...", ...]} and receive
 * {"dim": <int>, "vectors": [[...], ...]} with one vector per text, in
 * order. Requests with more than 64 texts, non-JSON bodies, or a
 * missing/invalid "texts" field are rejected with a 400 and a JSON
 * {"error": "..."} body.
 */

import * as http from "node:http";

import type { Encoder } from "./encoder.js";

export const MAX_TEXTS_PER_REQUEST = 64;
const MAX_BODY_BYTES = 16 * 1024 * 1024;

function sendJson(
  res: http.ServerResponse,
  status: number,
  payload: unknown
): void {
  const body = JSON.stringify(payload);
  res.writeHead(status, {
    "content-type": "application/json",
    "content-length": Buffer.byteLength(body),
  });
  res.end(body);
}

function handleEmbed(encoder: Encoder, body: Buffer, res: http.ServerResponse): void {
  let parsed: unknown;
  try {
    parsed = JSON.parse(body.toString("utf8"));
  } catch {
    sendJson(res, 400, { error: "request body is not valid JSON" });
    return;
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    sendJson(res, 400, { error: "request body must be a JSON object" });
    return;
  }
  const texts = (parsed as Record<string, unknown>).texts;
  if (!Array.isArray(texts) || !texts.every((t) => typeof t === "string")) {
    sendJson(res, 400, { error: "'texts' must be an array of strings" });
    return;
  }
  if (texts.length > MAX_TEXTS_PER_REQUEST) {
    sendJson(res, 400, {
      error: `at most ${MAX_TEXTS_PER_REQUEST} texts per request, got ${texts.length}`,
    });
    return;
  }
  const vectors = encoder.encode(texts as string[]).map((vec) => Array.from(vec));
  sendJson(res, 200, { dim: encoder.dim, vectors });
}

/** Build (but do not start) the provider server for an encoder. */
export function createServer(encoder: Encoder): http.Server {
  return http.createServer((req, res) => {
    if (req.method !== "POST") {
      sendJson(res, 405, { error: "only POST is supported" });
      return;
    }
    const chunks: Buffer[] = [];
    let total = 0;
    req.on("data", (chunk: Buffer) => {
      total += chunk.length;
      if (total > MAX_BODY_BYTES) {
        sendJson(res, 413, { error: "request body too large" });
        req.destroy();
        return;
      }
      chunks.push(chunk);
    });
    req.on("end", () => {
      if (res.writableEnded) {
        return;
      }
      handleEmbed(encoder, Buffer.concat(chunks), res);
    });
    req.on("error", () => {
      if (!res.writableEnded) {
        sendJson(res, 400, { error: "request stream failed" });
      }
    });
  });
}

/** Start the server and resolve with the bound port (0 = ephemeral). */
export function listen(server: http.Server, port: number, host = "127.0.0.1"): Promise<number> {
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(port, host, () => {
      const address = server.address();
      if (address === null || typeof address === "string") {
        reject(new Error("server bound to a pipe, expected a TCP port"));
        return;
      }
      resolve(address.port);
    });
  });
}
