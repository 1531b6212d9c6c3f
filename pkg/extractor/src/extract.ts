/**
 * The extraction pipeline: enumerate images in sorted order, decode and
 * resize, batch them through the frozen backbone, and write the pooled
 * activations as a CBFV file with a label-map sidecar.
 *
 * Unreadable images are skipped with a warning and counted; a class whose
 * images all fail is fatal (the feature file must cover every class).
 */

import * as tf from '@tensorflow/tfjs'
import { Jimp } from 'jimp'

import { Backbone, normalize } from './backbones.js'
import { FeatureRecord, writeCbfv, writeLabelMap } from './cbfv.js'
import { Enumerated, ImageEntry, ImagePayload } from './datasets.js'

export interface ExtractOptions {
  batchSize?: number
  /** cap on records per class, applied after enumeration; mainly for smoke runs */
  limitPerClass?: number
  log?: (message: string) => void
}

export interface ExtractResult {
  dim: number
  written: number
  skipped: number
  classNames: string[]
}

async function decodeToPixels(
  payload: ImagePayload,
  size: number,
): Promise<Float32Array> {
  let image
  if (payload.kind === 'encoded') {
    image = await Jimp.fromBuffer(payload.data)
  } else {
    const rgba = new Uint8Array(payload.width * payload.height * 4)
    for (let p = 0, n = payload.width * payload.height; p < n; p++) {
      rgba[p * 4] = payload.data[p * 3]
      rgba[p * 4 + 1] = payload.data[p * 3 + 1]
      rgba[p * 4 + 2] = payload.data[p * 3 + 2]
      rgba[p * 4 + 3] = 255
    }
    image = Jimp.fromBitmap({
      width: payload.width,
      height: payload.height,
      data: Buffer.from(rgba.buffer),
    })
  }
  if (image.bitmap.width !== size || image.bitmap.height !== size) {
    image.resize({ w: size, h: size })
  }
  const rgba = image.bitmap.data
  const pixels = new Float32Array(size * size * 3)
  for (let p = 0, n = size * size; p < n; p++) {
    pixels[p * 3] = rgba[p * 4] / 255
    pixels[p * 3 + 1] = rgba[p * 4 + 1] / 255
    pixels[p * 3 + 2] = rgba[p * 4 + 2] / 255
  }
  return pixels
}

function applyLimit(entries: ImageEntry[], limit: number | undefined): ImageEntry[] {
  if (!limit) return entries
  const taken = new Map<number, number>()
  return entries.filter(e => {
    const n = taken.get(e.label) ?? 0
    if (n >= limit) return false
    taken.set(e.label, n + 1)
    return true
  })
}

export async function extract(
  dataset: Enumerated,
  backbone: Backbone,
  outPath: string,
  options: ExtractOptions = {},
): Promise<ExtractResult> {
  const log = options.log ?? ((m: string) => console.error(m))
  const batchSize = options.batchSize ?? 32
  const size = backbone.inputSize
  const entries = applyLimit(dataset.entries, options.limitPerClass)

  const records: FeatureRecord[] = []
  let skipped = 0
  let dim = 0
  for (let start = 0; start < entries.length; start += batchSize) {
    const batch = entries.slice(start, start + batchSize)
    const decoded: { entry: ImageEntry; pixels: Float32Array }[] = []
    for (const entry of batch) {
      try {
        decoded.push({ entry, pixels: await decodeToPixels(await entry.read(), size) })
      } catch (err) {
        skipped += 1
        log(`warning: skipping unreadable image ${entry.source}: ${(err as Error).message}`)
      }
    }
    if (decoded.length === 0) continue

    const input = new Float32Array(decoded.length * size * size * 3)
    decoded.forEach(({ pixels }, i) => input.set(pixels, i * size * size * 3))
    const features = tf.tidy(() => {
      const tensor = tf.tensor4d(input, [decoded.length, size, size, 3])
      return backbone.run(normalize(tensor))
    })
    const [, featDim] = features.shape
    dim = featDim
    const values = (await features.data()) as Float32Array
    features.dispose()
    decoded.forEach(({ entry }, i) => {
      records.push({
        label: entry.label,
        vector: values.slice(i * featDim, (i + 1) * featDim),
      })
    })
  }

  const present = new Set(records.map(r => r.label))
  for (let label = 0; label < dataset.classNames.length; label++) {
    if (!present.has(label) && dataset.entries.some(e => e.label === label)) {
      throw new Error(`class ${dataset.classNames[label]}: every image failed to decode`)
    }
  }
  if (records.length === 0) throw new Error('no images could be decoded')

  writeCbfv(outPath, dim, records)
  writeLabelMap(`${outPath}.labels.txt`, dataset.classNames)
  if (skipped > 0) log(`skipped ${skipped} unreadable image(s)`)
  return { dim, written: records.length, skipped, classNames: dataset.classNames }
}
