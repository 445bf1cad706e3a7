export interface AttributeDelta {
    name: string;
    from: number;
    to: number;
    delta: number;
}

/**
 * Attribute-value differences between two queries, largest |delta| first
 * (ties alphabetical). Attributes equal on both sides are omitted, so
 * identical queries yield an empty list.
 */
export function attributeDeltas(
    a: Record<string, number>,
    b: Record<string, number>,
): AttributeDelta[] {
    const names = new Set([...Object.keys(a), ...Object.keys(b)]);
    const rows: AttributeDelta[] = [];
    for (const name of names) {
        const from = a[name] ?? 0;
        const to = b[name] ?? 0;
        if (from !== to) {
            rows.push({ name, from, to, delta: to - from });
        }
    }
    rows.sort(
        (x, y) =>
            Math.abs(y.delta) - Math.abs(x.delta) || x.name.localeCompare(y.name),
    );
    return rows;
}
