/** Shared shapes for the annotation client. */

export interface KeypointInfo {
  name: string;
  parent: string | null;
  swap: string | null;
}

export interface SkeletonInfo {
  keypoints: KeypointInfo[];
}

export interface FrameInfo {
  id: number;
  width: number;
  height: number;
  annotated: boolean;
  outlier: boolean;
}

/** One pose row as it travels over the wire; null = missing keypoint. */
export interface PoseRow {
  name: string;
  x: number | null;
  y: number | null;
  score: number | null;
}

export function emptyPose(names: string[]): PoseRow[] {
  return names.map((name) => ({ name, x: null, y: null, score: null }));
}

export function clonePose(rows: PoseRow[]): PoseRow[] {
  return rows.map((r) => ({ ...r }));
}

export function rowPlaced(row: PoseRow): boolean {
  return row.x !== null && row.y !== null;
}

export function rowsEqual(a: PoseRow, b: PoseRow, eps = 1e-9): boolean {
  if (a.name !== b.name) return false;
  const num = (p: number | null, q: number | null) =>
    (p === null && q === null) ||
    (p !== null && q !== null && Math.abs(p - q) <= eps);
  return num(a.x, b.x) && num(a.y, b.y) && num(a.score, b.score);
}

/** Edges (parent index, child index) derived from the skeleton listing. */
export function skeletonEdges(skeleton: SkeletonInfo): Array<[number, number]> {
  const index = new Map(skeleton.keypoints.map((k, i) => [k.name, i]));
  const edges: Array<[number, number]> = [];
  skeleton.keypoints.forEach((kp, child) => {
    if (kp.parent !== null) {
      const parent = index.get(kp.parent);
      if (parent !== undefined) edges.push([parent, child]);
    }
  });
  return edges;
}
