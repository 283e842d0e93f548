/** HTTP service implementing wire protocol v1.
 *
 * Modes: "echo" returns request latents unchanged (integration tests run
 * without any model state); "tiny" serves the deterministic tiny backbone,
 * one scheduler step per denoise call, conditioned on the prompt handle and
 * the depth crop. Errors are returned in-band as
 * {"status": "error", "message": ...} with the offending field named.
 */
import express, { Express } from "express";
import { z } from "zod";

import { BlobError, decodeF32, encodeF32, shapeSize } from "./blob.js";
import { PromptRegistry } from "./embeddings.js";
import { decodeLatent, denoiseStep } from "./scheduler.js";
import { CHANNELS, LoraDelta, TinyDenoiser } from "./tinymodel.js";

export interface ServiceOptions {
  mode: "echo" | "tiny";
  seed?: number;
  lora?: LoraDelta | null;
}

const denoiseSchema = z.object({
  session_id: z.string(),
  timestep: z.number().int().nonnegative(),
  shape: z.tuple([z.number().int().positive(), z.number().int().positive(),
                  z.number().int().positive()]),
  latent_b64: z.string(),
  depth_b64: z.string(),
  prompt_handle: z.string(),
});

const embedSchema = z.union([
  z.object({ prompt_text: z.string().min(1) }),
  z.object({ embedding_b64: z.string(), dim: z.number().int().positive() }),
]);

const decodeSchema = z.object({
  session_id: z.string(),
  shape: z.tuple([z.number().int().positive(), z.number().int().positive(),
                  z.number().int().positive()]),
  latent_b64: z.string(),
});

function errorMessage(err: unknown): string {
  if (err instanceof z.ZodError) {
    const issue = err.issues[0];
    const path = issue.path.join(".") || "body";
    return `${path}: ${issue.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

export function createApp(options: ServiceOptions): Express {
  const app = express();
  app.use(express.json({ limit: "64mb" }));
  const registry = new PromptRegistry();
  const model = options.mode === "tiny"
    ? new TinyDenoiser(options.seed ?? 1234) : null;
  if (model && options.lora) model.lora = options.lora;

  const reply = (handler: (body: unknown) => Record<string, unknown>) =>
    (req: express.Request, res: express.Response) => {
      try {
        res.json(handler(req.body));
      } catch (err) {
        res.json({ status: "error", message: errorMessage(err) });
      }
    };

  app.post("/v1/denoise", reply((raw) => {
    const body = denoiseSchema.parse(raw);
    const [c, h, w] = body.shape;
    decodeF32(body.latent_b64, c * h * w, "latent_b64");
    decodeF32(body.depth_b64, h * w, "depth_b64");
    if (options.mode === "echo") {
      return { status: "ok", latent_b64: body.latent_b64 };
    }
    if (h !== w) throw new BlobError("shape: window latents must be square");
    if (c !== CHANNELS) {
      throw new BlobError(`shape: tiny mode serves ${CHANNELS} channels, got ${c}`);
    }
    const latent = decodeF32(body.latent_b64, c * h * w, "latent_b64");
    const depth = decodeF32(body.depth_b64, h * w, "depth_b64");
    const out = denoiseStep(model!, {
      latent, size: h, depth, timestep: body.timestep,
      embedding: registry.resolve(body.prompt_handle),
    });
    return { status: "ok", latent_b64: encodeF32(out) };
  }));

  app.post("/v1/embed", reply((raw) => {
    const body = embedSchema.parse(raw);
    if ("prompt_text" in body) {
      return { prompt_handle: registry.registerText(body.prompt_text) };
    }
    const values = decodeF32(body.embedding_b64, body.dim, "embedding_b64");
    return { prompt_handle: registry.registerEmbedding(values) };
  }));

  app.post("/v1/decode", reply((raw) => {
    const body = decodeSchema.parse(raw);
    const [c, h, w] = body.shape;
    const latent = decodeF32(body.latent_b64, c * h * w, "latent_b64");
    if (h !== w) throw new BlobError("shape: latents must be square");
    const { image, height, width } = decodeLatent(latent, h);
    return {
      status: "ok",
      shape: [height, width, 3],
      image_b64: encodeF32(image),
    };
  }));

  app.use((req, res) => {
    res.status(404).json({ status: "error",
                           message: `unknown route ${req.path}` });
  });
  return app;
}

export function startServer(port: number, options: ServiceOptions) {
  const app = createApp(options);
  const server = app.listen(port, () => {
    const address = server.address();
    const bound = typeof address === "object" && address ? address.port : port;
    console.log(`sidecar listening on :${bound} (mode=${options.mode})`);
  });
  return server;
}
