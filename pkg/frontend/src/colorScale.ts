/**
 * Fixed monotone color scale for cell intensities.
 *
 * The bucket is a pure function of the intensity alone (never of the grid it
 * appears in), so equal intensities always render identically.
 */

export const SHADE_BUCKETS = 10;

/** Map an intensity in [0, 1] to a shade bucket 0..9 (0 = empty/lightest). */
export function shadeBucket(intensity: number): number {
  if (!(intensity > 0)) {
    return 0;
  }
  return Math.min(SHADE_BUCKETS - 1, Math.floor(intensity * SHADE_BUCKETS));
}

/** CSS background color for a bucket: white through a dark blue ramp. */
export function bucketColor(bucket: number): string {
  const t = bucket / (SHADE_BUCKETS - 1);
  const r = Math.round(247 - t * (247 - 8));
  const g = Math.round(251 - t * (251 - 48));
  const b = Math.round(255 - t * (255 - 107));
  return `rgb(${r}, ${g}, ${b})`;
}
