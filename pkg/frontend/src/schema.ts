/**
 * Scribble JSON wire format shared with the CLI and session service.
 *
 * canonicalScribbleJson must stay byte-compatible with the server's
 * serializer (2-space indent, fixed key order, trailing newline), so an
 * export from the UI can be fed to the CLI unchanged.
 */

export type Vertex = [number, number];

export interface ScribbleJson {
  category: number;
  polyline: Vertex[];
  brush_radius: number;
}

export interface ScribbleSetJson {
  image: string;
  width: number;
  height: number;
  scribbles: ScribbleJson[];
}

export function canonicalScribbleJson(set: ScribbleSetJson): string {
  const ordered = {
    image: set.image,
    width: Math.trunc(set.width),
    height: Math.trunc(set.height),
    scribbles: set.scribbles.map((s) => ({
      category: Math.trunc(s.category),
      polyline: s.polyline.map(([x, y]) => [Math.trunc(x), Math.trunc(y)]),
      brush_radius: Math.trunc(s.brush_radius),
    })),
  };
  return JSON.stringify(ordered, null, 2) + "\n";
}
