export interface AffectCoordinate {
  valence: number;
  arousal: number;
}

export function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

/**
 * Map a pixel position on the pad to affect coordinates. Left to right
 * is valence -1..1; top to bottom is arousal 1..-1 (up means energetic).
 * Pointer excursions outside the pad clamp to the edges, so the result
 * is always inside the unit square.
 */
export function padToCoords(
  x: number,
  y: number,
  width: number,
  height: number,
): AffectCoordinate {
  if (!(width > 0) || !(height > 0)) {
    throw new RangeError(`pad size must be positive, got ${width}x${height}`);
  }
  return {
    valence: clamp((2 * x) / width - 1, -1, 1),
    arousal: clamp(1 - (2 * y) / height, -1, 1),
  };
}
