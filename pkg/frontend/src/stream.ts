/** Resumable server-sent-event client over fetch streaming.
 *
 * Works identically in the browser and under node (no EventSource
 * dependency). On any disconnect it reconnects with
 * ?since_seq=<last seen>, so no event is ever lost or duplicated
 * downstream (applyEvent drops repeats by sequence number).
 */

import { EventRecord } from "./types.js";

export interface SseBlock {
  data: string | null;
}

/** Split buffered SSE text into complete blocks and the unfinished rest. */
export function splitSseBuffer(buffer: string): { blocks: string[]; rest: string } {
  const blocks: string[] = [];
  let rest = buffer;
  for (;;) {
    const cut = rest.indexOf("\n\n");
    if (cut < 0) break;
    blocks.push(rest.slice(0, cut));
    rest = rest.slice(cut + 2);
  }
  return { blocks, rest };
}

/** Extract the data payload of one SSE block; comments/keep-alives yield null. */
export function parseSseBlock(block: string): SseBlock {
  const dataLines = block
    .split("\n")
    .filter((line) => line.startsWith("data: "))
    .map((line) => line.slice(6));
  return { data: dataLines.length ? dataLines.join("\n") : null };
}

export interface StreamHandle {
  stop(): void;
}

export function openStream(
  baseUrl: string,
  sinceSeq: () => number,
  onEvent: (ev: EventRecord) => void,
  onStatus: (status: "live" | "lost") => void,
  retryMs = 1000,
): StreamHandle {
  let stopped = false;
  let controller: AbortController | null = null;

  async function pump(): Promise<void> {
    while (!stopped) {
      controller = new AbortController();
      try {
        const resp = await fetch(`${baseUrl}/api/stream?since_seq=${sinceSeq()}`, {
          signal: controller.signal,
        });
        if (!resp.ok || !resp.body) throw new Error(`stream HTTP ${resp.status}`);
        onStatus("live");
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { blocks, rest } = splitSseBuffer(buffer);
          buffer = rest;
          for (const block of blocks) {
            const { data } = parseSseBlock(block);
            if (data !== null) onEvent(JSON.parse(data) as EventRecord);
          }
        }
        throw new Error("stream ended");
      } catch (err) {
        if (stopped) return;
        onStatus("lost");
        await new Promise((resolve) => setTimeout(resolve, retryMs));
      }
    }
  }

  void pump();
  return {
    stop() {
      stopped = true;
      controller?.abort();
    },
  };
}
