/** Streaming asset loader.
 *
 * Fetches the manifest, then block textures as the residency policy
 * demands, respecting the byte budget with the same degradation rule
 * the service's planner applies. Failed fetches retry with capped
 * exponential backoff; a block that ultimately fails renders as
 * absent rather than wedging the frame loop.
 */

import { BlockData, assembleBlock } from "./assets.js";
import {
  BlockId,
  Manifest,
  blockDir,
  blockEntry,
  blockKey,
  parseManifest,
} from "./manifest.js";
import { Camera } from "./math.js";
import { RenderPlan, ResidentSet, applyPlan, selectLod } from "./policy.js";
import { ShaderWeights } from "./shading.js";
import { blockBounds } from "./manifest.js";

export interface FetchStats {
  fetches: number;
  evictions: number;
  failures: number;
  bytes: number;
}

export interface LoaderOptions {
  budget?: number;
  maxRetries?: number;
  baseBackoffMs?: number;
  fetchImpl?: typeof fetch;
}

export class StreamLoader {
  readonly baseUrl: string;
  manifest!: Manifest;
  weights = new Map<string, ShaderWeights>();
  resident!: ResidentSet<Promise<BlockData | null>>;
  decoded = new Map<string, BlockData>();
  stats: FetchStats = { fetches: 0, evictions: 0, failures: 0, bytes: 0 };
  onBlockReady: (() => void) | null = null;
  private readonly maxRetries: number;
  private readonly baseBackoffMs: number;
  private readonly fetchImpl: typeof fetch;
  private readonly budgetOverride?: number;

  constructor(manifestUrl: string, opts: LoaderOptions = {}) {
    this.baseUrl = manifestUrl.replace(/\/manifest\.json$/, "");
    this.maxRetries = opts.maxRetries ?? 4;
    this.baseBackoffMs = opts.baseBackoffMs ?? 250;
    this.fetchImpl = opts.fetchImpl ?? fetch.bind(globalThis);
    this.budgetOverride = opts.budget;
  }

  async init(): Promise<Manifest> {
    const res = await this.fetchWithRetry(`${this.baseUrl}/manifest.json`);
    this.manifest = parseManifest(await res.json());
    this.resident = new ResidentSet(
      this.budgetOverride ?? this.manifest.policy.memory_budget,
    );
    for (const [group, file] of Object.entries(this.manifest.shader_groups)) {
      const r = await this.fetchWithRetry(`${this.baseUrl}/${file}`);
      this.weights.set(group, (await r.json()) as ShaderWeights);
    }
    return this.manifest;
  }

  /** Plan for the camera and reconcile residency; returns the plan. */
  update(cam: Camera): RenderPlan {
    const plan = selectLod(cam, this.manifest);
    applyPlan(plan, this.resident, (b) => this.fetchBlock(b), this.manifest);
    for (const b of plan.toEvict) {
      this.decoded.delete(blockKey(b));
      this.stats.evictions += 1;
    }
    return plan;
  }

  /** Decoded data for every currently-drawable planned block. */
  drawable(plan: RenderPlan): BlockData[] {
    const out: BlockData[] = [];
    for (const b of plan.blocks) {
      const d = this.decoded.get(blockKey(b));
      if (d) out.push(d);
    }
    return out;
  }

  private fetchBlock(b: BlockId): Promise<BlockData | null> {
    const key = blockKey(b);
    const entry = blockEntry(this.manifest, b);
    const dir = blockDir(b);
    const job = (async () => {
      try {
        const files = new Map<string, Uint8Array>();
        await Promise.all(
          Object.keys(entry.files).map(async (name) => {
            const res = await this.fetchWithRetry(`${this.baseUrl}/${dir}/${name}`);
            const buf = new Uint8Array(await res.arrayBuffer());
            files.set(name, buf);
            this.stats.bytes += buf.length;
          }),
        );
        this.stats.fetches += 1;
        const data = await assembleBlock(
          this.manifest, b, files, blockBounds(this.manifest.layout, b),
        );
        // residency may have moved on while we were downloading
        if (this.resident.entries.has(key)) {
          this.decoded.set(key, data);
          this.onBlockReady?.();
        }
        return data;
      } catch (err) {
        this.stats.failures += 1;
        console.error(`block ${key} failed to load:`, err);
        return null;
      }
    })();
    return job;
  }

  private async fetchWithRetry(url: string): Promise<Response> {
    let attempt = 0;
    for (;;) {
      try {
        const res = await this.fetchImpl(url);
        if (res.ok) return res;
        if (res.status >= 400 && res.status < 500) {
          throw new Error(`${url}: HTTP ${res.status}`);
        }
        throw new RetryableError(`${url}: HTTP ${res.status}`);
      } catch (err) {
        const retryable = err instanceof RetryableError || err instanceof TypeError;
        if (!retryable || attempt >= this.maxRetries) throw err;
        const delay = Math.min(this.baseBackoffMs * 2 ** attempt, 5_000);
        await new Promise((r) => setTimeout(r, delay));
        attempt += 1;
      }
    }
  }
}

class RetryableError extends Error {}
