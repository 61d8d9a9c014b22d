import type { ContourDoc, ContourPhone, SweepResponse } from './types.js';

export interface LineSeries {
  name: string;
  ys: number[];
  dashed?: boolean;
}

export interface ChartModel {
  title: string;
  xLabels: string[];
  series: LineSeries[];
  /** When set the chart is not drawn; the reason is shown instead. */
  disabledReason?: string;
}

type Channel = keyof Omit<ContourPhone, 'phone'>;

const CHANNELS: [Channel, string][] = [
  ['pitch_log_hz', 'pitch (log Hz)'],
  ['energy_log', 'energy (log)'],
  ['duration_s', 'duration (s)'],
];

function channelValues(contour: ContourDoc, channel: Channel): number[] {
  return contour.phones.map((p) => p[channel]);
}

/**
 * One chart per prosody channel. The current contour draws solid; the
 * contour from before the last acknowledged change draws dashed behind
 * it, which is the what-if feedback an edit produces.
 */
export function contourOverlayModels(
  current: ContourDoc | null,
  previous: ContourDoc | null,
): ChartModel[] {
  if (!current) {
    return [
      {
        title: 'prosody contour',
        xLabels: [],
        series: [],
        disabledReason:
          'no renderer loaded on the service; contours are unavailable',
      },
    ];
  }
  const xLabels = current.phones.map((p) => p.phone);
  return CHANNELS.map(([channel, title]) => {
    const series: LineSeries[] = [];
    if (previous && previous.phones.length === current.phones.length) {
      series.push({
        name: 'before',
        ys: channelValues(previous, channel),
        dashed: true,
      });
    }
    series.push({ name: 'now', ys: channelValues(current, channel) });
    return { title, xLabels, series };
  });
}

/**
 * Chart of sweep statistics against the swept intensity. Five series:
 * pitch mean/std, energy mean/std, total duration.
 */
export function sweepChartModel(
  resp: SweepResponse | null,
  disabledReason?: string,
): ChartModel {
  if (disabledReason) {
    return { title: 'intensity sweep', xLabels: [], series: [], disabledReason };
  }
  if (!resp) {
    return {
      title: 'intensity sweep',
      xLabels: [],
      series: [],
      disabledReason: 'run a sweep to see prosody trends',
    };
  }
  const points = resp.sweep;
  const xLabels = points.map((p) => String(p.value));
  return {
    title: 'intensity sweep',
    xLabels,
    series: [
      { name: 'pitch mean', ys: points.map((p) => p.pitch_mean) },
      { name: 'pitch std', ys: points.map((p) => p.pitch_std) },
      { name: 'energy mean', ys: points.map((p) => p.energy_mean) },
      { name: 'energy std', ys: points.map((p) => p.energy_std) },
      { name: 'duration total (s)', ys: points.map((p) => p.duration_total) },
    ],
  };
}

const SVG_NS = 'http://www.w3.org/2000/svg';

const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e'];

const WIDTH = 420;
const HEIGHT = 120;
const PAD = 8;

/** Scale one series into pixel space; flat series draw mid-height. */
function toPoints(ys: number[]): string {
  const lo = Math.min(...ys);
  const hi = Math.max(...ys);
  const span = hi - lo;
  const step = ys.length > 1 ? (WIDTH - 2 * PAD) / (ys.length - 1) : 0;
  return ys
    .map((y, i) => {
      const t = span > 0 ? (y - lo) / span : 0.5;
      const px = PAD + i * step;
      const py = HEIGHT - PAD - t * (HEIGHT - 2 * PAD);
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(' ');
}

/**
 * Draw a chart model as an inline SVG inside a figure. Disabled models
 * render their explanation as text instead of a plot.
 */
export function renderChart(model: ChartModel): HTMLElement {
  const fig = document.createElement('figure');
  fig.className = 'chart';
  const caption = document.createElement('figcaption');
  caption.textContent = model.title;
  fig.appendChild(caption);

  if (model.disabledReason) {
    fig.classList.add('chart-disabled');
    const note = document.createElement('p');
    note.className = 'chart-note';
    note.textContent = model.disabledReason;
    fig.appendChild(note);
    return fig;
  }

  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute('width', String(WIDTH));
  svg.setAttribute('height', String(HEIGHT));
  model.series.forEach((series, i) => {
    const line = document.createElementNS(SVG_NS, 'polyline');
    line.setAttribute('points', toPoints(series.ys));
    line.setAttribute('fill', 'none');
    line.setAttribute('stroke', PALETTE[i % PALETTE.length]);
    line.setAttribute('stroke-width', '1.5');
    if (series.dashed) line.setAttribute('stroke-dasharray', '5,3');
    line.dataset.series = series.name;
    svg.appendChild(line);
  });
  fig.appendChild(svg);

  const legend = document.createElement('div');
  legend.className = 'chart-legend';
  model.series.forEach((series, i) => {
    const item = document.createElement('span');
    item.textContent = series.name;
    item.style.color = PALETTE[i % PALETTE.length];
    legend.appendChild(item);
  });
  fig.appendChild(legend);
  return fig;
}
