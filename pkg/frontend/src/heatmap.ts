import type { Level, SessionDoc } from './types.js';

export interface HeatmapGroup {
  level: Level;
  label: string;
  /** One label per segment (column) of this level. */
  columns: string[];
  /** One row per emotion; values[c] is the intensity on segment c. */
  rows: { emotion: string; values: number[] }[];
}

function wordLabels(doc: SessionDoc): string[] {
  const count = doc.hed.words.length;
  if (doc.words && doc.words.length === count) {
    return doc.words.map((w) => w.join(' '));
  }
  return Array.from({ length: count }, (_, i) => `w${i}`);
}

function phoneLabels(doc: SessionDoc): string[] {
  const count = doc.hed.phones.length;
  if (doc.contour && doc.contour.phones.length === count) {
    return doc.contour.phones.map((p) => p.phone);
  }
  if (doc.words) {
    const flat = doc.words.flat();
    if (flat.length === count) return flat;
  }
  return Array.from({ length: count }, (_, i) => `p${i}`);
}

/** Transpose segment-major rows into one value row per emotion. */
function emotionRows(
  emotions: string[],
  segments: number[][],
): { emotion: string; values: number[] }[] {
  return emotions.map((emotion, e) => ({
    emotion,
    values: segments.map((row) => row[e]),
  }));
}

/**
 * Three stacked row groups, top to bottom: the whole utterance (one
 * column), one column per word, one column per phone. Within a group
 * each row is an emotion and each cell that emotion's intensity on the
 * column's segment.
 */
export function heatmapModel(doc: SessionDoc): HeatmapGroup[] {
  const emotions = doc.hed.emotions;
  return [
    {
      level: 'utterance',
      label: 'utterance',
      columns: ['all'],
      rows: emotionRows(emotions, [doc.hed.utterance]),
    },
    {
      level: 'word',
      label: 'words',
      columns: wordLabels(doc),
      rows: emotionRows(emotions, doc.hed.words),
    },
    {
      level: 'phoneme',
      label: 'phones',
      columns: phoneLabels(doc),
      rows: emotionRows(emotions, doc.hed.phones),
    },
  ];
}

/** White at 0 through deep red at 1; intensities live in [0, 1]. */
export function cellColor(value: number): string {
  const t = Math.max(0, Math.min(1, value));
  const g = Math.round(255 - 195 * t);
  const b = Math.round(255 - 215 * t);
  return `rgb(255,${g},${b})`;
}
