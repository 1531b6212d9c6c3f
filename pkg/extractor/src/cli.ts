#!/usr/bin/env node
/**
 * extract --dataset <root | cifar100:root> --backbone <resnet18|resnet34|test>
 *         --out <file.cbfv> [--split all|train|test|train:0.8] [--model <dir-or-url>]
 *         [--batch-size 32] [--limit-per-class N]
 *
 * Folder trees default to resnet18, the CIFAR-100 binary set to resnet34
 * (matching the feature pipeline the downstream engine expects); --backbone
 * overrides either.
 */

import { parseArgs } from 'node:util'

import { loadBackbone } from './backbones.js'
import { enumerateDataset, parseSplit } from './datasets.js'
import { extract } from './extract.js'

function usageError(message: string): never {
  console.error(`error: ${message}`)
  console.error(
    'usage: cbfv-extract extract --dataset <root|cifar100:root> ' +
      '--backbone <resnet18|resnet34|test> --out <file.cbfv> ' +
      '[--split all|train|test|train:0.8] [--model <dir-or-url>] ' +
      '[--batch-size N] [--limit-per-class N]',
  )
  process.exit(2)
}

export async function main(argv: string[]): Promise<number> {
  if (argv[0] !== 'extract') usageError(`unknown command ${argv[0] ?? '(none)'}`)
  const { values } = parseArgs({
    args: argv.slice(1),
    options: {
      dataset: { type: 'string' },
      backbone: { type: 'string' },
      split: { type: 'string' },
      model: { type: 'string' },
      out: { type: 'string' },
      'batch-size': { type: 'string' },
      'limit-per-class': { type: 'string' },
    },
  })
  if (!values.dataset) usageError('--dataset is required')
  if (!values.out) usageError('--out is required')

  const isPacked = values.dataset.startsWith('cifar100:')
  const backboneName = values.backbone ?? (isPacked ? 'resnet34' : 'resnet18')
  const split = parseSplit(values.split ?? (isPacked ? 'train' : 'all'))

  const dataset = enumerateDataset(values.dataset, split)
  const backbone = await loadBackbone(backboneName, values.model)
  try {
    const result = await extract(dataset, backbone, values.out, {
      batchSize: values['batch-size'] ? Number(values['batch-size']) : undefined,
      limitPerClass: values['limit-per-class']
        ? Number(values['limit-per-class'])
        : undefined,
    })
    console.log(
      JSON.stringify({
        out: values.out,
        backbone: backboneName,
        dim: result.dim,
        records: result.written,
        skipped: result.skipped,
        classes: result.classNames.length,
      }),
    )
    return 0
  } finally {
    backbone.dispose()
  }
}

const invokedDirectly =
  process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop()!)
if (invokedDirectly) {
  main(process.argv.slice(2))
    .then(code => process.exit(code))
    .catch(err => {
      console.error(JSON.stringify({ error: { message: (err as Error).message } }))
      process.exit(1)
    })
}
