/** Poll a job until it leaves the queued/running states. */

import type { ApiClient } from "./api.js";
import type { JobPayload } from "./types.js";

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export async function pollJob(
  client: ApiClient,
  jobId: string,
  { intervalMs = 1000, timeoutMs = 300_000, sleep = defaultSleep }: PollOptions = {},
): Promise<JobPayload> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const payload = await client.getJob(jobId);
    if (payload.status === "done" || payload.status === "error") return payload;
    if (Date.now() >= deadline) {
      throw new Error(`job ${jobId} still ${payload.status} after ${timeoutMs} ms`);
    }
    await sleep(intervalMs);
  }
}
