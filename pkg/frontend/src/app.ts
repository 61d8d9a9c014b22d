import { ServiceClient, ServiceError } from './client.js';
import { DragCoalescer } from './coalesce.js';
import { EditorStore } from './state.js';
import { cellColor, heatmapModel } from './heatmap.js';
import { contourOverlayModels, renderChart, sweepChartModel } from './charts.js';
import type { DownstreamPolicy, Level, SweepResponse } from './types.js';

export const SWEEP_VALUES = [0, 0.25, 0.5, 0.75, 1.0];

function editKey(level: Level, index: number, emotion: string): string {
  return `${level}:${index}:${emotion}`;
}

function parseKey(key: string): [Level, number, string] {
  // emotion labels may themselves contain the separator
  const [level, index, ...rest] = key.split(':');
  return [level as Level, Number(index), rest.join(':')];
}

function messageOf(err: unknown): string {
  if (err instanceof ServiceError) return err.detail;
  return err instanceof Error ? err.message : String(err);
}

/**
 * Single-session editor wired to one service client.
 *
 * Everything on screen is drawn from the store, and the store only ever
 * holds snapshots the service acknowledged, so the display cannot drift
 * from the server's session state.
 */
export class EditorApp {
  readonly store = new EditorStore();
  readonly coalescer: DragCoalescer;

  private lastSweep: SweepResponse | null = null;
  private sweepError: string | null = null;
  /** Values the user pushed that have not been acknowledged yet. */
  private lastPushed = new Map<string, number>();

  private banner!: HTMLElement;
  private textInput!: HTMLInputElement;
  private heatmapBox!: HTMLElement;
  private panelBox!: HTMLElement;
  private policyToggle!: HTMLInputElement;
  private contourBox!: HTMLElement;
  private sweepSelect!: HTMLSelectElement;
  private sweepButton!: HTMLButtonElement;
  private sweepBox!: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ServiceClient,
  ) {
    this.coalescer = new DragCoalescer(
      (key, value) => this.sendEdit(key, value),
      (key) => this.lastPushed.delete(key),
    );
    this.buildSkeleton();
    this.store.subscribe(() => this.render());
    this.render();
  }

  // ---------------------------------------------------------------- actions

  /** Start a fresh session from a phone string; empty input never leaves
   *  the client. */
  async loadText(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed) {
      this.store.showBanner('enter a phone string first');
      return;
    }
    try {
      const doc = await this.client.createFromText(trimmed);
      this.lastSweep = null;
      this.sweepError = null;
      this.lastPushed.clear();
      this.store.acknowledge(doc);
    } catch (err) {
      this.store.showBanner(messageOf(err));
    }
  }

  /** Queue one slider value; rapid calls for the same cell coalesce. */
  slide(level: Level, index: number, emotion: string, value: number): void {
    const key = editKey(level, index, emotion);
    this.lastPushed.set(key, value);
    this.coalescer.push(key, value);
  }

  /** Resolves once no edit requests remain queued or in flight. */
  settle(): Promise<void> {
    return this.coalescer.idle();
  }

  setPolicy(policy: DownstreamPolicy): void {
    this.store.setPolicy(policy);
  }

  async runSweep(emotion: string): Promise<void> {
    const doc = this.store.state.doc;
    if (!doc) return;
    if (!doc.contour) {
      this.sweepError =
        'no renderer loaded on the service; sweeps are unavailable';
      this.lastSweep = null;
      this.render();
      return;
    }
    const sel = this.store.state.selection;
    const template = {
      level: sel?.level ?? ('utterance' as Level),
      index: sel?.index ?? 0,
      emotion,
      value: 0,
    };
    try {
      this.lastSweep = await this.client.sweep(doc.session_id, {
        template,
        values: SWEEP_VALUES,
      });
      this.sweepError = null;
    } catch (err) {
      this.lastSweep = null;
      this.sweepError = messageOf(err);
    }
    this.render();
  }

  get sweep(): SweepResponse | null {
    return this.lastSweep;
  }

  private async sendEdit(key: string, value: number): Promise<void> {
    const doc = this.store.state.doc;
    if (!doc) return;
    const [level, index, emotion] = parseKey(key);
    this.store.editStarted();
    try {
      const ack = await this.client.edit(doc.session_id, {
        level,
        index,
        emotion,
        value,
        downstream_policy: this.store.state.policy,
      });
      if (this.lastPushed.get(key) === value) this.lastPushed.delete(key);
      this.store.acknowledge(ack);
    } catch (err) {
      // rejected edits leave the store untouched, so the re-render
      // snaps the slider back to the acknowledged value
      this.lastPushed.delete(key);
      this.store.showBanner(messageOf(err));
      throw err;
    } finally {
      this.store.editSettled();
    }
  }

  // ------------------------------------------------------------------- DOM

  private buildSkeleton(): void {
    this.root.innerHTML = '';

    const form = document.createElement('form');
    form.id = 'load-form';
    this.textInput = document.createElement('input');
    this.textInput.id = 'text-input';
    this.textInput.type = 'text';
    this.textInput.placeholder = 'phones, e.g. AA B, K IY N';
    const loadButton = document.createElement('button');
    loadButton.type = 'submit';
    loadButton.textContent = 'load';
    form.append(this.textInput, loadButton);
    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      void this.loadText(this.textInput.value);
    });

    this.banner = document.createElement('div');
    this.banner.id = 'banner';
    this.banner.hidden = true;

    this.heatmapBox = document.createElement('section');
    this.heatmapBox.id = 'heatmap';

    this.panelBox = document.createElement('section');
    this.panelBox.id = 'editor-panel';

    const policyLabel = document.createElement('label');
    policyLabel.id = 'policy';
    this.policyToggle = document.createElement('input');
    this.policyToggle.id = 'policy-toggle';
    this.policyToggle.type = 'checkbox';
    this.policyToggle.addEventListener('change', () => {
      this.store.setPolicy(this.policyToggle.checked ? 'repredict' : 'hold');
    });
    policyLabel.append(
      this.policyToggle,
      document.createTextNode(' repredict levels below an edit'),
    );

    this.contourBox = document.createElement('section');
    this.contourBox.id = 'contour-charts';

    const sweepSection = document.createElement('section');
    sweepSection.id = 'sweep';
    this.sweepSelect = document.createElement('select');
    this.sweepSelect.id = 'sweep-emotion';
    this.sweepButton = document.createElement('button');
    this.sweepButton.id = 'sweep-run';
    this.sweepButton.type = 'button';
    this.sweepButton.textContent = 'sweep 0 to 1';
    this.sweepButton.addEventListener('click', () => {
      void this.runSweep(this.sweepSelect.value);
    });
    this.sweepBox = document.createElement('div');
    this.sweepBox.id = 'sweep-chart';
    sweepSection.append(this.sweepSelect, this.sweepButton, this.sweepBox);

    this.root.append(
      form,
      this.banner,
      this.heatmapBox,
      this.panelBox,
      policyLabel,
      this.contourBox,
      sweepSection,
    );
  }

  private render(): void {
    const state = this.store.state;

    this.banner.hidden = state.banner === null;
    this.banner.textContent = state.banner ?? '';

    this.policyToggle.checked = state.policy === 'repredict';

    this.renderHeatmap();
    this.renderPanel();
    this.renderCharts();
    this.renderSweep();
  }

  private renderHeatmap(): void {
    this.heatmapBox.innerHTML = '';
    const doc = this.store.state.doc;
    if (!doc) return;
    const selection = this.store.state.selection;

    for (const group of heatmapModel(doc)) {
      const box = document.createElement('div');
      box.className = 'heatmap-group';
      box.dataset.level = group.level;

      const title = document.createElement('h3');
      title.textContent = group.label;
      box.appendChild(title);

      const table = document.createElement('table');
      const head = table.insertRow();
      head.insertCell();
      for (const label of group.columns) {
        const th = document.createElement('th');
        th.textContent = label;
        th.scope = 'col';
        head.appendChild(th);
      }
      group.rows.forEach((row) => {
        const tr = table.insertRow();
        const name = document.createElement('th');
        name.textContent = row.emotion;
        name.scope = 'row';
        tr.appendChild(name);
        row.values.forEach((value, col) => {
          const cell = tr.insertCell();
          cell.className = 'heat-cell';
          cell.dataset.level = group.level;
          cell.dataset.index = String(col);
          cell.dataset.emotion = row.emotion;
          cell.textContent = value.toFixed(2);
          cell.style.backgroundColor = cellColor(value);
          if (
            selection &&
            selection.level === group.level &&
            selection.index === col
          ) {
            cell.classList.add('selected');
          }
          cell.addEventListener('click', () => {
            this.store.select({ level: group.level, index: col });
          });
        });
      });
      box.appendChild(table);
      this.heatmapBox.appendChild(box);
    }
  }

  private renderPanel(): void {
    this.panelBox.innerHTML = '';
    const { doc, selection } = this.store.state;
    if (!doc || !selection) return;

    const rows =
      selection.level === 'utterance'
        ? [doc.hed.utterance]
        : selection.level === 'word'
          ? doc.hed.words
          : doc.hed.phones;
    const row = rows[selection.index];
    if (!row) return;

    const title = document.createElement('h3');
    title.textContent = `${selection.level} ${selection.index}`;
    this.panelBox.appendChild(title);

    doc.hed.emotions.forEach((emotion, e) => {
      const key = editKey(selection.level, selection.index, emotion);
      const label = document.createElement('label');
      label.className = 'slider-row';
      label.textContent = emotion;

      const slider = document.createElement('input');
      slider.type = 'range';
      slider.min = '0';
      slider.max = '1';
      slider.step = '0.01';
      slider.dataset.emotion = emotion;
      // while a drag is settling, show the value the user pushed last;
      // otherwise the acknowledged one
      const pushed = this.lastPushed.get(key);
      slider.value = String(
        this.coalescer.pending(key) && pushed !== undefined ? pushed : row[e],
      );
      slider.addEventListener('input', () => {
        this.slide(
          selection.level,
          selection.index,
          emotion,
          Number(slider.value),
        );
      });
      label.appendChild(slider);
      this.panelBox.appendChild(label);
    });
  }

  private renderCharts(): void {
    this.contourBox.innerHTML = '';
    const { doc, previousContour } = this.store.state;
    if (!doc) return;
    const models = contourOverlayModels(doc.contour ?? null, previousContour);
    for (const model of models) {
      this.contourBox.appendChild(renderChart(model));
    }
  }

  private renderSweep(): void {
    const doc = this.store.state.doc;

    const chosen = this.sweepSelect.value;
    this.sweepSelect.innerHTML = '';
    for (const emotion of doc?.hed.emotions ?? []) {
      const opt = document.createElement('option');
      opt.value = emotion;
      opt.textContent = emotion;
      this.sweepSelect.appendChild(opt);
    }
    if (doc?.hed.emotions.includes(chosen)) this.sweepSelect.value = chosen;
    this.sweepButton.disabled = !doc;

    this.sweepBox.innerHTML = '';
    if (!doc) return;
    const disabled =
      this.sweepError ??
      (doc.contour
        ? undefined
        : 'no renderer loaded on the service; sweeps are unavailable');
    this.sweepBox.appendChild(
      renderChart(sweepChartModel(this.lastSweep, disabled ?? undefined)),
    );
  }
}
