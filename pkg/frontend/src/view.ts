/** Zoom/pan/mirror math between screen and image coordinates.
 *
 * The mirror toggle is purely presentational: it changes how pixels and
 * markers are drawn, and screenToImage inverts it, so stored coordinates
 * are always true image coordinates.
 */

export interface ViewState {
  scale: number;
  panX: number;
  panY: number;
  mirrored: boolean;
  imageWidth: number;
}

export interface Point {
  x: number;
  y: number;
}

export function initialView(imageWidth: number): ViewState {
  return { scale: 1, panX: 0, panY: 0, mirrored: false, imageWidth };
}

export function imageToScreen(view: ViewState, p: Point): Point {
  const ix = view.mirrored ? view.imageWidth - 1 - p.x : p.x;
  return { x: ix * view.scale + view.panX, y: p.y * view.scale + view.panY };
}

export function screenToImage(view: ViewState, s: Point): Point {
  const ix = (s.x - view.panX) / view.scale;
  const x = view.mirrored ? view.imageWidth - 1 - ix : ix;
  return { x, y: (s.y - view.panY) / view.scale };
}

/** Zoom by `factor`, keeping the image point under `anchor` fixed. */
export function zoomAt(view: ViewState, anchor: Point, factor: number): ViewState {
  const before = screenToImage(view, anchor);
  const scale = Math.min(64, Math.max(1 / 16, view.scale * factor));
  const moved = { ...view, scale };
  const after = imageToScreen(moved, before);
  return {
    ...moved,
    panX: moved.panX + (anchor.x - after.x),
    panY: moved.panY + (anchor.y - after.y),
  };
}

export function panBy(view: ViewState, dx: number, dy: number): ViewState {
  return { ...view, panX: view.panX + dx, panY: view.panY + dy };
}
