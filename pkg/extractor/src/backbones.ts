/**
 * Frozen feature-extraction backbones.
 *
 * `resnet18` / `resnet34` load a converted tfjs model (graph or layers
 * format) from a local directory or URL supplied via --model; ImageNet
 * weights are not bundled.  Whatever the model returns is reduced to one
 * vector per image: rank-4 outputs are global-average-pooled over the
 * spatial axes, rank-2 outputs are used as-is, so a model converted up to
 * its penultimate convolutional stage yields the conventional pooled
 * embedding (512 features for both resnet variants).
 *
 * `test` is a tiny deterministically-initialized conv stack used by the
 * test suite and for pipeline smoke runs; it needs no weight files.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'
import * as tf from '@tensorflow/tfjs'

export interface Backbone {
  name: string
  inputSize: number
  /** (batch, size, size, 3) normalized input -> (batch, features) */
  run(batch: tf.Tensor4D): tf.Tensor2D
  dispose(): void
}

export const BACKBONE_INPUT: Record<string, number> = {
  resnet18: 224,
  resnet34: 224,
  test: 32,
}

// standard ImageNet channel statistics, applied identically for every
// backbone so converted torchvision models see their expected input
const CHANNEL_MEAN = [0.485, 0.456, 0.406]
const CHANNEL_STD = [0.229, 0.224, 0.225]

export function normalize(batch: tf.Tensor4D): tf.Tensor4D {
  return tf.tidy(() => {
    const mean = tf.tensor1d(CHANNEL_MEAN).reshape([1, 1, 1, 3])
    const std = tf.tensor1d(CHANNEL_STD).reshape([1, 1, 1, 3])
    return batch.sub(mean).div(std)
  })
}

function pooled(output: tf.Tensor): tf.Tensor2D {
  if (output.rank === 4) {
    return tf.mean(output as tf.Tensor4D, [1, 2]) as tf.Tensor2D
  }
  if (output.rank === 2) return output as tf.Tensor2D
  throw new Error(`backbone output rank ${output.rank}; expected 2 or 4`)
}

/** Minimal file-system IO handler (the browser build of tfjs has none). */
function fileSystemLoader(modelJsonPath: string): tf.io.IOHandler {
  return {
    load: async () => {
      const dir = path.dirname(modelJsonPath)
      const modelJson = JSON.parse(fs.readFileSync(modelJsonPath, 'utf-8'))
      const weightsManifest = modelJson.weightsManifest ?? []
      const specs: tf.io.WeightsManifestEntry[] = []
      const buffers: Buffer[] = []
      for (const group of weightsManifest) {
        specs.push(...group.weights)
        for (const p of group.paths) buffers.push(fs.readFileSync(path.join(dir, p)))
      }
      const weightData = new Uint8Array(Buffer.concat(buffers)).buffer
      return {
        modelTopology: modelJson.modelTopology,
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        convertedBy: modelJson.convertedBy,
        weightSpecs: specs,
        weightData,
      }
    },
  }
}

async function loadConverted(name: string, modelPath: string): Promise<Backbone> {
  const isUrl = /^https?:\/\//.test(modelPath)
  const source = isUrl
    ? modelPath
    : fileSystemLoader(
        modelPath.endsWith('.json') ? modelPath : path.join(modelPath, 'model.json'),
      )
  let model: tf.GraphModel | tf.LayersModel
  try {
    model = await tf.loadGraphModel(source as never)
  } catch {
    model = await tf.loadLayersModel(source as never)
  }
  return {
    name,
    inputSize: BACKBONE_INPUT[name],
    run: batch => tf.tidy(() => pooled(model.predict(batch) as tf.Tensor)),
    dispose: () => model.dispose(),
  }
}

// deterministic PRNG for the test backbone's fixed weights
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function seededTensor(shape: number[], rng: () => number): tf.Tensor {
  const size = shape.reduce((a, b) => a * b, 1)
  const values = new Float32Array(size)
  for (let i = 0; i < size; i++) values[i] = (rng() - 0.5) * 0.5
  return tf.tensor(values, shape)
}

function buildTestBackbone(): Backbone {
  const rng = mulberry32(0xc0ffee)
  const model = tf.sequential({
    layers: [
      tf.layers.conv2d({
        inputShape: [32, 32, 3],
        filters: 16,
        kernelSize: 3,
        strides: 2,
        activation: 'relu',
      }),
      tf.layers.conv2d({ filters: 32, kernelSize: 3, strides: 2, activation: 'relu' }),
    ],
  })
  for (const layer of model.layers) {
    const shapes = layer.getWeights().map(w => w.shape)
    layer.setWeights(shapes.map(shape => seededTensor(shape, rng)))
  }
  return {
    name: 'test',
    inputSize: 32,
    run: batch => tf.tidy(() => pooled(model.predict(batch) as tf.Tensor)),
    dispose: () => model.dispose(),
  }
}

export async function loadBackbone(name: string, modelPath?: string): Promise<Backbone> {
  if (name === 'test') return buildTestBackbone()
  if (name === 'resnet18' || name === 'resnet34') {
    if (!modelPath) {
      throw new Error(
        `backbone ${name} needs --model <dir-or-url> pointing at a converted tfjs model`,
      )
    }
    return loadConverted(name, modelPath)
  }
  throw new Error(`unknown backbone ${name}; expected resnet18, resnet34, or test`)
}
