// Drives the assembled editor through its DOM surface against the
// in-memory service. Layout counts, slider behaviour, policy handling
// and error paths all live here.

import { beforeEach, describe, expect, test, vi } from 'vitest';
import { EditorApp } from '../src/app';
import { ServiceClient } from '../src/client';
import { FakeService, type FakeServiceOptions } from './fakeService';

const TEXT = 'AA B, K IY N';

function makeApp(opts: FakeServiceOptions = {}) {
  const fake = new FakeService(opts);
  const client = new ServiceClient('', fake.fetch);
  const root = document.createElement('div');
  document.body.appendChild(root);
  const app = new EditorApp(root, client);
  return { app, fake, client, root };
}

function cell(root: HTMLElement, level: string, index: number, emotion: string) {
  const el = root.querySelector<HTMLElement>(
    `.heat-cell[data-level="${level}"][data-index="${index}"]` +
      `[data-emotion="${emotion}"]`,
  );
  if (!el) throw new Error(`no cell ${level}/${index}/${emotion}`);
  return el;
}

function sliderFor(root: HTMLElement, emotion: string): HTMLInputElement {
  const el = root.querySelector<HTMLInputElement>(
    `#editor-panel input[data-emotion="${emotion}"]`,
  );
  if (!el) throw new Error(`no slider for ${emotion}`);
  return el;
}

beforeEach(() => {
  document.body.innerHTML = '';
});

describe('loading a session', () => {
  test('valid text renders one utterance, two word and five phone columns', async () => {
    const { app, root } = makeApp();
    await app.loadText(TEXT);

    const groups = root.querySelectorAll('.heatmap-group');
    expect(groups).toHaveLength(3);
    const cellsIn = (level: string) =>
      root.querySelectorAll(`.heat-cell[data-level="${level}"]`).length;
    // four emotions per row group
    expect(cellsIn('utterance')).toBe(4 * 1);
    expect(cellsIn('word')).toBe(4 * 2);
    expect(cellsIn('phoneme')).toBe(4 * 5);
  });

  test('the form submit path loads too', async () => {
    const { fake, root } = makeApp();
    const input = root.querySelector<HTMLInputElement>('#text-input')!;
    input.value = TEXT;
    root
      .querySelector('#load-form')!
      .dispatchEvent(new Event('submit', { cancelable: true }));
    await vi.waitFor(() => {
      expect(root.querySelectorAll('.heatmap-group')).toHaveLength(3);
    });
    expect(fake.callsTo('POST', '/sessions')).toHaveLength(1);
  });

  test('empty text is rejected client-side without a request', async () => {
    const { app, fake, root } = makeApp();
    await app.loadText('   ');
    expect(fake.calls).toHaveLength(0);
    const banner = root.querySelector<HTMLElement>('#banner')!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain('phone string');
  });

  test('a server failure shows a banner and leaves state unchanged', async () => {
    const { app, fake, root } = makeApp();
    await app.loadText(TEXT);
    const before = app.store.state.doc;

    fake.failNext(500);
    await app.loadText(TEXT);

    const banner = root.querySelector<HTMLElement>('#banner')!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain('internal error');
    expect(app.store.state.doc).toBe(before);
    expect(root.querySelectorAll('.heatmap-group')).toHaveLength(3);
  });

  test('a failure on the very first load keeps the editor empty', async () => {
    const { app, fake, root } = makeApp();
    fake.failNext(500);
    await app.loadText(TEXT);
    expect(app.store.state.doc).toBeNull();
    expect(root.querySelectorAll('.heatmap-group')).toHaveLength(0);
    expect(root.querySelector<HTMLElement>('#banner')!.hidden).toBe(false);
  });
});

describe('editing through sliders', () => {
  test('clicking a cell opens one bounded slider per emotion', async () => {
    const { app, root } = makeApp();
    await app.loadText(TEXT);

    cell(root, 'word', 1, 'Sad').click();
    const sliders = root.querySelectorAll<HTMLInputElement>(
      '#editor-panel input[type="range"]',
    );
    expect(sliders).toHaveLength(4);
    for (const s of sliders) {
      expect(s.min).toBe('0');
      expect(s.max).toBe('1');
    }
    const sad = sliderFor(root, 'Sad');
    expect(Number(sad.value)).toBeCloseTo(
      app.store.state.doc!.hed.words[1][2],
      10,
    );
  });

  test('a slider edit updates the cell and overlays the contour', async () => {
    const { app, root } = makeApp();
    await app.loadText(TEXT);
    const durationsBefore = app.store.state
      .doc!.contour!.phones.map((p) => p.duration_s)
      .reduce((a, b) => a + b, 0);

    cell(root, 'word', 1, 'Sad').click();
    const sad = sliderFor(root, 'Sad');
    sad.value = '1';
    sad.dispatchEvent(new Event('input'));
    await app.settle();

    expect(app.store.state.doc!.hed.words[1][2]).toBe(1);
    expect(cell(root, 'word', 1, 'Sad').textContent).toBe('1.00');

    // what-if overlay: previous contour kept, drawn dashed behind the new one
    expect(app.store.state.previousContour).not.toBeNull();
    const pitchChart = root.querySelectorAll('#contour-charts polyline');
    expect(pitchChart.length).toBeGreaterThanOrEqual(6);
    const durationsAfter = app.store.state
      .doc!.contour!.phones.map((p) => p.duration_s)
      .reduce((a, b) => a + b, 0);
    // the synthetic rules stretch duration as Sad rises
    expect(durationsAfter).toBeGreaterThan(durationsBefore);
  });

  test('a rejected edit resets the slider and reports the reason', async () => {
    const { app, fake, root } = makeApp();
    await app.loadText(TEXT);
    cell(root, 'word', 1, 'Sad').click();
    const original = app.store.state.doc!.hed.words[1][2];

    fake.failNext(422, 'value 1.5 outside [0, 1]');
    const sad = sliderFor(root, 'Sad');
    sad.value = '0.9';
    sad.dispatchEvent(new Event('input'));
    await app.settle();

    expect(app.store.state.doc!.hed.words[1][2]).toBe(original);
    expect(Number(sliderFor(root, 'Sad').value)).toBeCloseTo(original, 10);
    const banner = root.querySelector<HTMLElement>('#banner')!;
    expect(banner.textContent).toContain('outside [0, 1]');
  });

  test('hold keeps downstream rows; repredict refreshes them', async () => {
    const { app, root } = makeApp();
    await app.loadText(TEXT);
    const wordsBefore = JSON.stringify(app.store.state.doc!.hed.words);

    app.slide('utterance', 0, 'Sad', 0.9);
    await app.settle();
    expect(JSON.stringify(app.store.state.doc!.hed.words)).toBe(wordsBefore);

    const toggle = root.querySelector<HTMLInputElement>('#policy-toggle')!;
    toggle.checked = true;
    toggle.dispatchEvent(new Event('change'));
    expect(app.store.state.policy).toBe('repredict');

    app.slide('utterance', 0, 'Sad', 0.95);
    await app.settle();
    expect(JSON.stringify(app.store.state.doc!.hed.words)).not.toBe(
      wordsBefore,
    );
  });

  test('rapid drags coalesce but the final value always lands', async () => {
    const { app, fake, root } = makeApp();
    await app.loadText(TEXT);
    cell(root, 'phoneme', 3, 'Happy').click();

    const steps = Array.from({ length: 15 }, (_, i) => (i + 1) / 20);
    for (const v of steps) app.slide('phoneme', 3, 'Happy', v);
    await app.settle();

    const edits = fake.callsTo('POST', '/edits');
    expect(edits.length).toBeLessThan(steps.length);
    expect(app.store.state.doc!.hed.phones[3][1]).toBe(0.75);
    expect(Number(sliderFor(root, 'Happy').value)).toBeCloseTo(0.75, 10);
  });

  test('edits on different cells are not coalesced together', async () => {
    const { app, fake } = makeApp();
    await app.loadText(TEXT);
    app.slide('word', 0, 'Angry', 0.4);
    app.slide('word', 1, 'Sad', 0.6);
    await app.settle();
    expect(fake.callsTo('POST', '/edits')).toHaveLength(2);
    expect(app.store.state.doc!.hed.words[0][0]).toBe(0.4);
    expect(app.store.state.doc!.hed.words[1][2]).toBe(0.6);
  });
});

describe('sweeps', () => {
  test('running a Sad sweep draws the five stat series', async () => {
    const { app, root } = makeApp();
    await app.loadText(TEXT);

    const select = root.querySelector<HTMLSelectElement>('#sweep-emotion')!;
    select.value = 'Sad';
    root.querySelector<HTMLButtonElement>('#sweep-run')!.click();
    await vi.waitFor(() => {
      expect(root.querySelectorAll('#sweep-chart polyline')).toHaveLength(5);
    });

    const durations = app.sweep!.sweep.map((p) => p.duration_total);
    for (let i = 1; i < durations.length; i++) {
      expect(durations[i]).toBeGreaterThan(durations[i - 1]);
    }
  });

  test('sweeps run against the selected segment scope', async () => {
    const { app, fake, root } = makeApp();
    await app.loadText(TEXT);
    cell(root, 'word', 1, 'Sad').click();
    await app.runSweep('Sad');
    const call = fake.callsTo('POST', '/sweep')[0].body as {
      template: { level: string; index: number };
    };
    expect(call.template.level).toBe('word');
    expect(call.template.index).toBe(1);
  });

  test('sweeping never disturbs the session', async () => {
    const { app, fake } = makeApp();
    await app.loadText(TEXT);
    const id = app.store.state.doc!.session_id;
    const before = fake.snapshot(id);
    await app.runSweep('Sad');
    expect(fake.snapshot(id)).toEqual(before);
    expect(app.store.state.doc).toEqual(before);
  });

  test('without a renderer the charts are disabled with an explanation', async () => {
    const { app, fake, root } = makeApp({ renderer: false });
    await app.loadText(TEXT);

    await app.runSweep('Sad');
    // disabled client-side: no request ever leaves
    expect(fake.callsTo('POST', '/sweep')).toHaveLength(0);
    const note = root.querySelector('#sweep-chart .chart-note');
    expect(note?.textContent).toContain('no renderer');
    const contourNote = root.querySelector('#contour-charts .chart-note');
    expect(contourNote?.textContent).toContain('no renderer');
  });
});
