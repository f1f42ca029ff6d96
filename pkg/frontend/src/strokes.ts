/**
 * Stroke editing state: the ordered stroke list, unbounded undo/redo, and
 * export to the scribble wire format.  Vertices are clamped into the bound
 * image rectangle when a stroke is added, so exports always validate.
 */

import { canonicalScribbleJson, ScribbleSetJson, Vertex } from "./schema.js";

export interface Stroke {
  category: number;
  polyline: Vertex[];
  brushRadius: number;
}

export class StrokeState {
  readonly imageRef: string;
  readonly width: number;
  readonly height: number;
  activeCategory = 1;

  private strokes: Stroke[] = [];
  private redoStack: Stroke[] = [];

  constructor(imageRef: string, width: number, height: number) {
    this.imageRef = imageRef;
    this.width = width;
    this.height = height;
  }

  private clamp([x, y]: Vertex): Vertex {
    return [
      Math.min(Math.max(Math.round(x), 0), this.width - 1),
      Math.min(Math.max(Math.round(y), 0), this.height - 1),
    ];
  }

  /** Append a stroke from a pointer path; a bare click yields a spot. */
  addStroke(path: Vertex[], category: number, brushRadius: number): Stroke | null {
    if (path.length === 0) return null;
    const polyline: Vertex[] = [];
    for (const p of path) {
      const v = this.clamp(p);
      const last = polyline[polyline.length - 1];
      if (!last || last[0] !== v[0] || last[1] !== v[1]) polyline.push(v);
    }
    const stroke = { category, polyline, brushRadius };
    this.strokes.push(stroke);
    this.redoStack = []; // a new stroke invalidates the redo history
    return stroke;
  }

  undo(): boolean {
    const stroke = this.strokes.pop();
    if (!stroke) return false;
    this.redoStack.push(stroke);
    return true;
  }

  redo(): boolean {
    const stroke = this.redoStack.pop();
    if (!stroke) return false;
    this.strokes.push(stroke);
    return true;
  }

  get canUndo(): boolean {
    return this.strokes.length > 0;
  }

  get canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  get count(): number {
    return this.strokes.length;
  }

  all(): readonly Stroke[] {
    return this.strokes;
  }

  toJson(): ScribbleSetJson {
    return {
      image: this.imageRef,
      width: this.width,
      height: this.height,
      scribbles: this.strokes.map((s) => ({
        category: s.category,
        polyline: s.polyline.map(([x, y]) => [x, y] as Vertex),
        brush_radius: s.brushRadius,
      })),
    };
  }

  export(): string {
    return canonicalScribbleJson(this.toJson());
  }
}
