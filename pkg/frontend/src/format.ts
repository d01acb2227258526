/** Display formatting for probabilities and timings.
 *
 * Formatting never rescales or renormalizes: the numbers shown are the
 * payload values rounded for display only.
 */

export function formatPercent(p: number, decimals = 1): string {
  return `${(p * 100).toFixed(decimals)}%`;
}

export interface ProbRow {
  label: string;
  value: number;
  text: string;
}

export function formatProbs(probs: number[], classNames: string[]): ProbRow[] {
  return probs.map((value, i) => ({
    label: classNames[i] ?? `class ${i}`,
    value,
    text: formatPercent(value),
  }));
}

export function probsTotalText(probs: number[]): string {
  return formatPercent(probs.reduce((acc, p) => acc + p, 0));
}

export function formatMs(ms: number): string {
  return ms >= 1000 ? `${(ms / 1000).toFixed(2)} s` : `${ms} ms`;
}
