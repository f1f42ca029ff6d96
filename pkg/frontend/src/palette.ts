/**
 * Category colors: 21 distinguishable entries (background + 20) generated
 * with the bit-reversal scheme common in segmentation tooling, overridable
 * by a palette JSON of [r, g, b] triples.
 */

export type Rgb = [number, number, number];

function bit(v: number, i: number): number {
  return (v >> i) & 1;
}

export function defaultPalette(n = 21): Rgb[] {
  const colors: Rgb[] = [];
  for (let c = 0; c < n; c++) {
    let [r, g, b] = [0, 0, 0];
    let v = c;
    for (let i = 0; i < 8; i++) {
      r |= bit(v, 0) << (7 - i);
      g |= bit(v, 1) << (7 - i);
      b |= bit(v, 2) << (7 - i);
      v >>= 3;
    }
    colors.push([r, g, b]);
  }
  return colors;
}

export function parsePalette(json: unknown): Rgb[] {
  if (!Array.isArray(json) || json.length === 0) {
    throw new Error("palette must be a non-empty array of [r, g, b] triples");
  }
  return json.map((entry, i) => {
    if (!Array.isArray(entry) || entry.length !== 3 ||
        !entry.every((v) => Number.isInteger(v) && v >= 0 && v <= 255)) {
      throw new Error(`palette entry ${i} is not an [r, g, b] byte triple`);
    }
    return [entry[0], entry[1], entry[2]] as Rgb;
  });
}

export function cssColor([r, g, b]: Rgb): string {
  return `rgb(${r}, ${g}, ${b})`;
}
