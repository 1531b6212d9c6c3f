/**
 * CBFV feature-file writer (and reader, used by the tests).
 *
 * Layout, all little-endian:
 *   magic "CBFV" | u32 version=1 | u32 dim | u64 record count
 *   then per record: u32 label | dim x IEEE-754 binary32 components
 *
 * This file format is the contract with the learning engine that consumes
 * the features; it must be emitted byte-exactly.
 */

import * as fs from 'node:fs'

export const MAGIC = 'CBFV'
export const VERSION = 1
const HEADER_BYTES = 20

export interface FeatureRecord {
  label: number
  vector: Float32Array
}

export function encodeCbfv(dim: number, records: FeatureRecord[]): Buffer {
  if (dim < 1) throw new Error(`dimension ${dim} < 1`)
  if (records.length === 0) throw new Error('dataset must contain at least one record')
  const recordBytes = 4 + 4 * dim
  const out = Buffer.allocUnsafe(HEADER_BYTES + records.length * recordBytes)
  out.write(MAGIC, 0, 'ascii')
  out.writeUInt32LE(VERSION, 4)
  out.writeUInt32LE(dim, 8)
  out.writeBigUInt64LE(BigInt(records.length), 12)
  let offset = HEADER_BYTES
  for (let i = 0; i < records.length; i++) {
    const { label, vector } = records[i]
    if (!Number.isInteger(label) || label < 0 || label > 0xffffffff) {
      throw new Error(`record ${i}: label ${label} does not fit in u32`)
    }
    if (vector.length !== dim) {
      throw new Error(`record ${i}: vector length ${vector.length}, expected ${dim}`)
    }
    for (let k = 0; k < dim; k++) {
      if (!Number.isFinite(vector[k])) {
        throw new Error(`record ${i}: non-finite component`)
      }
    }
    out.writeUInt32LE(label, offset)
    offset += 4
    for (let k = 0; k < dim; k++) {
      out.writeFloatLE(vector[k], offset)
      offset += 4
    }
  }
  return out
}

export function writeCbfv(path: string, dim: number, records: FeatureRecord[]): void {
  fs.writeFileSync(path, encodeCbfv(dim, records))
}

export function readCbfv(path: string): { dim: number; records: FeatureRecord[] } {
  const raw = fs.readFileSync(path)
  if (raw.length < HEADER_BYTES) throw new Error(`${path}: truncated header`)
  if (raw.toString('ascii', 0, 4) !== MAGIC) throw new Error(`${path}: bad magic`)
  const version = raw.readUInt32LE(4)
  if (version !== VERSION) throw new Error(`${path}: unsupported version ${version}`)
  const dim = raw.readUInt32LE(8)
  const count = Number(raw.readBigUInt64LE(12))
  const recordBytes = 4 + 4 * dim
  if (raw.length !== HEADER_BYTES + count * recordBytes) {
    const whole = Math.floor((raw.length - HEADER_BYTES) / recordBytes)
    throw new Error(`${path}: truncated at record ${whole} (header declares ${count})`)
  }
  const records: FeatureRecord[] = []
  let offset = HEADER_BYTES
  for (let i = 0; i < count; i++) {
    const label = raw.readUInt32LE(offset)
    offset += 4
    const vector = new Float32Array(dim)
    for (let k = 0; k < dim; k++) {
      vector[k] = raw.readFloatLE(offset)
      offset += 4
    }
    records.push({ label, vector })
  }
  return { dim, records }
}

/** Sidecar mapping label IDs to class names: one "id<TAB>name" line per class. */
export function writeLabelMap(path: string, names: string[]): void {
  const lines = names.map((name, id) => `${id}\t${name}\n`).join('')
  fs.writeFileSync(path, lines, 'utf-8')
}
