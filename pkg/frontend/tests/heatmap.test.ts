import { describe, expect, test } from 'vitest';
import { cellColor, heatmapModel } from '../src/heatmap';
import type { SessionDoc } from '../src/types';

const DOC: SessionDoc = {
  session_id: 's1',
  source: 'predicted_from_text',
  speaker: 'spk0',
  log_length: 0,
  hed: {
    emotions: ['Angry', 'Happy', 'Sad'],
    utterance: [0.1, 0.2, 0.3],
    words: [
      [0.4, 0.5, 0.6],
      [0.7, 0.8, 0.9],
    ],
    phones: [
      [0.11, 0.12, 0.13],
      [0.21, 0.22, 0.23],
      [0.31, 0.32, 0.33],
    ],
  },
  words: [['AA', 'B'], ['K']],
};

describe('heatmapModel', () => {
  test('stacks utterance, word and phone groups in order', () => {
    const groups = heatmapModel(DOC);
    expect(groups.map((g) => g.level)).toEqual([
      'utterance',
      'word',
      'phoneme',
    ]);
    expect(groups[0].columns).toHaveLength(1);
    expect(groups[1].columns).toHaveLength(2);
    expect(groups[2].columns).toHaveLength(3);
  });

  test('each group has one row per emotion', () => {
    for (const group of heatmapModel(DOC)) {
      expect(group.rows.map((r) => r.emotion)).toEqual([
        'Angry',
        'Happy',
        'Sad',
      ]);
    }
  });

  test('cells transpose segment rows into emotion rows', () => {
    const [utt, words, phones] = heatmapModel(DOC);
    expect(utt.rows[2].values).toEqual([0.3]);
    // words[1][2] is the Sad intensity of the second word
    expect(words.rows[2].values[1]).toBe(0.9);
    expect(phones.rows[0].values).toEqual([0.11, 0.21, 0.31]);
  });

  test('word columns are labelled with their phones', () => {
    const groups = heatmapModel(DOC);
    expect(groups[1].columns).toEqual(['AA B', 'K']);
    expect(groups[2].columns).toEqual(['AA', 'B', 'K']);
  });

  test('missing structure falls back to positional labels', () => {
    const bare: SessionDoc = { ...DOC, words: undefined };
    const groups = heatmapModel(bare);
    expect(groups[1].columns).toEqual(['w0', 'w1']);
    expect(groups[2].columns).toEqual(['p0', 'p1', 'p2']);
  });

  test('phone labels prefer the contour when present', () => {
    const withContour: SessionDoc = {
      ...DOC,
      words: undefined,
      contour: {
        hop_s: 0.01,
        phones: ['AA', 'B', 'K'].map((phone) => ({
          phone,
          pitch_log_hz: 5,
          energy_log: -2,
          duration_s: 0.1,
        })),
        tracks: { pitch_log_hz: [], energy_log: [] },
      },
    };
    expect(heatmapModel(withContour)[2].columns).toEqual(['AA', 'B', 'K']);
  });
});

describe('cellColor', () => {
  test('runs white to red across the unit interval', () => {
    expect(cellColor(0)).toBe('rgb(255,255,255)');
    expect(cellColor(1)).toBe('rgb(255,60,40)');
  });

  test('clamps out-of-range inputs', () => {
    expect(cellColor(-3)).toBe(cellColor(0));
    expect(cellColor(42)).toBe(cellColor(1));
  });
});
