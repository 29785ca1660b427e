export function median(values: number[]): number {
  if (values.length === 0) throw new Error('median of empty list');
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 === 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

/** Median of `value` grouped by the string key, keys in first-seen order. */
export function groupedMedian<T>(
  rows: T[],
  key: (r: T) => string,
  value: (r: T) => number | null,
): Map<string, number> {
  const groups = new Map<string, number[]>();
  for (const row of rows) {
    const v = value(row);
    if (v === null) continue;
    const k = key(row);
    const bucket = groups.get(k);
    if (bucket) bucket.push(v);
    else groups.set(k, [v]);
  }
  return new Map([...groups.entries()].map(([k, vs]) => [k, median(vs)]));
}
