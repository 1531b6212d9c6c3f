/**
 * Dataset enumeration: class-per-directory image trees and the CIFAR-100
 * binary distribution.  Enumeration order is always sorted paths, so the
 * output is deterministic regardless of filesystem order or batch size.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

const IMAGE_EXTENSIONS = new Set(['.jpg', '.jpeg', '.png', '.bmp', '.gif', '.tiff'])

export interface ImageEntry {
  /** class index, dense 0..n-1 in sorted class-name order */
  label: number
  /** display source (path, or synthetic id for packed datasets) */
  source: string
  /** lazily read the encoded image or raw RGB pixels */
  read(): Promise<ImagePayload>
}

export type ImagePayload =
  | { kind: 'encoded'; data: Buffer }
  | { kind: 'rgb'; width: number; height: number; data: Uint8Array }

export interface Enumerated {
  classNames: string[]
  entries: ImageEntry[]
}

export type Split = { kind: 'all' } | { kind: 'train' | 'test'; ratio: number }

export function parseSplit(text: string | undefined): Split {
  if (!text || text === 'all') return { kind: 'all' }
  if (text === 'train' || text === 'test') return { kind: text, ratio: 0.8 }
  const m = /^(train|test):(0\.\d+)$/.exec(text)
  if (m) return { kind: m[1] as 'train' | 'test', ratio: Number(m[2]) }
  throw new Error(`bad split ${text}; expected all, train, test, or train:0.8`)
}

/** Per-class deterministic split: first ceil(ratio*n) sorted files train. */
function applySplit<T>(byClass: T[][], split: Split): T[][] {
  if (split.kind === 'all') return byClass
  return byClass.map(files => {
    const cut = Math.ceil(files.length * split.ratio)
    return split.kind === 'train' ? files.slice(0, cut) : files.slice(cut)
  })
}

export function enumerateFolderTree(root: string, split: Split): Enumerated {
  const classNames = fs
    .readdirSync(root, { withFileTypes: true })
    .filter(d => d.isDirectory())
    .map(d => d.name)
    .sort()
  if (classNames.length === 0) throw new Error(`${root}: no class directories`)

  const filesByClass = classNames.map(name => {
    const dir = path.join(root, name)
    return fs
      .readdirSync(dir)
      .filter(f => IMAGE_EXTENSIONS.has(path.extname(f).toLowerCase()))
      .sort()
      .map(f => path.join(dir, f))
  })
  const splitFiles = applySplit(filesByClass, split)
  splitFiles.forEach((files, label) => {
    if (files.length === 0) {
      throw new Error(`class ${classNames[label]} has no images in this split`)
    }
  })

  const entries: ImageEntry[] = []
  splitFiles.forEach((files, label) => {
    for (const file of files) {
      entries.push({
        label,
        source: file,
        read: async () => ({ kind: 'encoded', data: fs.readFileSync(file) }),
      })
    }
  })
  return { classNames, entries }
}

// CIFAR-100 binary distribution: train.bin / test.bin hold one record per
// image: coarse label byte, fine label byte, then 32x32 pixels as three
// channel planes (R, G, B) of 1024 bytes each.
const CIFAR_SIDE = 32
const CIFAR_RECORD = 2 + 3 * CIFAR_SIDE * CIFAR_SIDE

export function enumerateCifar100(root: string, split: Split): Enumerated {
  if (split.kind === 'all') {
    throw new Error('cifar100 ships pre-split; use --split train or --split test')
  }
  const file = path.join(root, `${split.kind}.bin`)
  if (!fs.existsSync(file)) throw new Error(`${file} not found`)
  const raw = fs.readFileSync(file)
  if (raw.length % CIFAR_RECORD !== 0) {
    throw new Error(`${file}: size ${raw.length} is not a whole number of records`)
  }
  const count = raw.length / CIFAR_RECORD

  const namesFile = path.join(root, 'fine_label_names.txt')
  let classNames: string[]
  if (fs.existsSync(namesFile)) {
    classNames = fs.readFileSync(namesFile, 'utf-8').trim().split('\n')
  } else {
    const maxLabel = (() => {
      let max = 0
      for (let i = 0; i < count; i++) max = Math.max(max, raw[i * CIFAR_RECORD + 1])
      return max
    })()
    classNames = Array.from({ length: maxLabel + 1 }, (_, i) => `class_${i}`)
  }

  const entries: ImageEntry[] = []
  for (let i = 0; i < count; i++) {
    const base = i * CIFAR_RECORD
    const label = raw[base + 1] // fine label
    entries.push({
      label,
      source: `${file}#${i}`,
      read: async () => {
        // planar RGB -> interleaved RGB
        const pixels = new Uint8Array(CIFAR_SIDE * CIFAR_SIDE * 3)
        const planes = raw.subarray(base + 2, base + CIFAR_RECORD)
        const planeSize = CIFAR_SIDE * CIFAR_SIDE
        for (let p = 0; p < planeSize; p++) {
          pixels[p * 3] = planes[p]
          pixels[p * 3 + 1] = planes[planeSize + p]
          pixels[p * 3 + 2] = planes[2 * planeSize + p]
        }
        return { kind: 'rgb', width: CIFAR_SIDE, height: CIFAR_SIDE, data: pixels }
      },
    })
  }
  const present = new Set(entries.map(e => e.label))
  for (let label = 0; label < classNames.length; label++) {
    if (!present.has(label)) throw new Error(`class ${classNames[label]} has no images`)
  }
  return { classNames, entries }
}

/** `cifar100:<dir>` selects the packed reader; anything else is a folder tree. */
export function enumerateDataset(spec: string, split: Split): Enumerated {
  if (spec.startsWith('cifar100:')) {
    return enumerateCifar100(spec.slice('cifar100:'.length), split)
  }
  return enumerateFolderTree(spec, split)
}
