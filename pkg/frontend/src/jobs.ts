/**
 * Job console logic: start, poll, cancel, and summarize training jobs.
 *
 * Polling is plain async iteration with an injected sleep so tests can run
 * it against fakes or the real service without timers.
 */

import { ServiceClient } from "./api";
import type { EditJson, JobJson, TrainConfigJson, TrainEventJson } from "./types";

export type SleepFn = (ms: number) => Promise<void>;

const realSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export function progressFraction(job: JobJson): number {
  if (job.progress.total <= 0) return 0;
  return job.progress.done / job.progress.total;
}

export function isTerminal(job: JobJson): boolean {
  return job.state === "done" || job.state === "failed";
}

/** Loss-curve series from the event stream, skipped steps excluded. */
export function lossSeries(events: TrainEventJson[]): {
  iters: number[];
  guidance: number[];
  shape: number[];
} {
  const kept = events.filter((e) => !e.skipped);
  return {
    iters: kept.map((e) => e.iter),
    guidance: kept.map((e) => e.losses.guidance_norm),
    shape: kept.map((e) => e.losses.shape),
  };
}

export interface PollOptions {
  intervalMs?: number;
  sleep?: SleepFn;
  onUpdate?: (job: JobJson) => void;
}

/** Poll until the job reaches done or failed; every poll hits the server. */
export async function pollJob(
  client: ServiceClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobJson> {
  const interval = options.intervalMs ?? 500;
  const sleep = options.sleep ?? realSleep;
  for (;;) {
    const job = await client.getJob(jobId);
    options.onUpdate?.(job);
    if (isTerminal(job)) return job;
    await sleep(interval);
  }
}

/** Start a training job and poll it to completion. */
export async function runTrainJob(
  client: ServiceClient,
  config: TrainConfigJson,
  options: PollOptions & { previewEvery?: number } = {},
): Promise<JobJson> {
  const job = await client.startTrain(config, options.previewEvery);
  options.onUpdate?.(job);
  return pollJob(client, job.job_id, options);
}

/** Start a geometry or color fine-tune (a 202 job) and poll it. */
export async function runFinetuneJob(
  client: ServiceClient,
  edit: EditJson,
  options: PollOptions = {},
): Promise<JobJson> {
  const job = (await client.edit(edit)) as JobJson;
  if (!("job_id" in job)) {
    throw new Error("edit did not start a job (placement edits are synchronous)");
  }
  options.onUpdate?.(job);
  return pollJob(client, job.job_id, options);
}
