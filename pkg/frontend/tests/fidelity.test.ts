// State-fidelity property: after every acknowledged interaction the
// client's editor state must equal the server's session snapshot field
// for field. A scripted pseudo-random drag sequence checks it, and the
// Sad sweep chart must reproduce the service's numbers untouched.

import { describe, expect, test } from 'vitest';
import { EditorApp, SWEEP_VALUES } from '../src/app';
import { ServiceClient } from '../src/client';
import { sweepChartModel } from '../src/charts';
import type { Level, SessionDoc } from '../src/types';
import { FakeService } from './fakeService';

const TEXT = 'AA B, K IY N';

// tiny deterministic PRNG so the script is reproducible
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

interface Scripted {
  level: Level;
  index: number;
  emotion: string;
  value: number;
  repredict: boolean;
}

export function scriptedEdits(doc: SessionDoc, count: number): Scripted[] {
  const rand = mulberry32(7);
  const levels: Level[] = ['utterance', 'word', 'phoneme'];
  const sizes: Record<Level, number> = {
    utterance: 1,
    word: doc.hed.words.length,
    phoneme: doc.hed.phones.length,
  };
  return Array.from({ length: count }, () => {
    const level = levels[Math.floor(rand() * levels.length)];
    return {
      level,
      index: Math.floor(rand() * sizes[level]),
      emotion: doc.hed.emotions[Math.floor(rand() * doc.hed.emotions.length)],
      value: Math.round(rand() * 100) / 100,
      repredict: rand() < 0.3,
    };
  });
}

function inUnitInterval(doc: SessionDoc): boolean {
  const rows = [doc.hed.utterance, ...doc.hed.words, ...doc.hed.phones];
  return rows.every((row) => row.every((v) => v >= 0 && v <= 1));
}

describe('editor state fidelity', () => {
  test('20 scripted slider interactions stay in lockstep with the server', async () => {
    const fake = new FakeService();
    const client = new ServiceClient('', fake.fetch);
    const root = document.createElement('div');
    const app = new EditorApp(root, client);

    await app.loadText(TEXT);
    const first = app.store.state.doc!;
    expect(app.store.state.doc).toEqual(fake.snapshot(first.session_id));

    const script = scriptedEdits(first, 20);
    for (const step of script) {
      app.setPolicy(step.repredict ? 'repredict' : 'hold');
      app.slide(step.level, step.index, step.emotion, step.value);
      await app.settle();

      const mirrored = app.store.state.doc!;
      // field for field against the server's own snapshot
      expect(mirrored).toEqual(fake.snapshot(mirrored.session_id));
      // and against what a second reader would fetch over the wire
      expect(mirrored).toEqual(await client.getSession(mirrored.session_id));
      expect(inUnitInterval(mirrored)).toBe(true);
    }
    expect(app.store.state.doc!.log_length).toBe(script.length);
  });

  test('the Sad sweep chart reproduces the service response unchanged', async () => {
    const fake = new FakeService();
    const client = new ServiceClient('', fake.fetch);
    const root = document.createElement('div');
    document.body.appendChild(root);
    const app = new EditorApp(root, client);

    await app.loadText(TEXT);
    await app.runSweep('Sad');

    const resp = app.sweep!;
    expect(resp.sweep.map((p) => p.value)).toEqual(SWEEP_VALUES);

    // Sad lengthens duration under the synthetic rules, monotonically
    const durations = resp.sweep.map((p) => p.duration_total);
    for (let i = 1; i < durations.length; i++) {
      expect(durations[i]).toBeGreaterThan(durations[i - 1]);
    }

    // the chart model carries the exact numbers from the response
    const model = sweepChartModel(resp);
    const durationSeries = model.series.find((s) =>
      s.name.startsWith('duration'),
    )!;
    expect(durationSeries.ys).toEqual(durations);
    expect(root.querySelectorAll('#sweep-chart polyline')).toHaveLength(5);
    document.body.removeChild(root);
  });
});
