/** Painting model for the semantic layout.
 *
 * Strokes are accumulated in IMAGE coordinates: screen events pass through
 * the current zoom/pan transform before being recorded, so the emitted
 * command payload is independent of the viewport. The server owns one-hot
 * repair; the model only pre-validates region indices and bounds.
 */

import type { Command } from "./api";

export type CommandSink = (command: Command) => void;

export interface Viewport {
  zoom: number;
  offsetX: number;
  offsetY: number;
}

export class MaskPainter {
  private region = 0;
  private radius = 2;
  private viewport: Viewport = { zoom: 1, offsetX: 0, offsetY: 0 };
  private stroke: [number, number][] = [];
  private queued: Command[] = [];
  private online = true;

  constructor(
    private emit: CommandSink,
    public readonly regionNames: string[],
    public readonly height: number,
    public readonly width: number,
  ) {}

  setRegion(region: number | string): void {
    const idx = typeof region === "string"
      ? this.regionNames.indexOf(region)
      : region;
    if (idx < 0 || idx >= this.regionNames.length) {
      throw new RangeError(`unknown region ${String(region)}`);
    }
    this.region = idx;
  }

  get currentRegion(): number {
    return this.region;
  }

  setRadius(radius: number): void {
    if (!(radius > 0)) throw new RangeError("radius must be > 0");
    this.radius = radius;
  }

  setViewport(viewport: Viewport): void {
    if (!(viewport.zoom > 0)) throw new RangeError("zoom must be > 0");
    this.viewport = { ...viewport };
  }

  /** Screen -> image coordinates under the current viewport. */
  toImage(screenX: number, screenY: number): [number, number] {
    const { zoom, offsetX, offsetY } = this.viewport;
    const x = (screenX - offsetX) / zoom;
    const y = (screenY - offsetY) / zoom;
    return [y, x];
  }

  private inBounds([y, x]: [number, number]): boolean {
    return y >= 0 && y < this.height && x >= 0 && x < this.width;
  }

  strokeStart(screenX: number, screenY: number): void {
    this.stroke = [];
    this.strokeMove(screenX, screenY);
  }

  strokeMove(screenX: number, screenY: number): void {
    const pt = this.toImage(screenX, screenY);
    if (this.inBounds(pt)) this.stroke.push(pt);
  }

  /** Finish the stroke and emit one paint command (if anything landed). */
  strokeEnd(): Command | null {
    if (this.stroke.length === 0) return null;
    const command: Command = {
      type: "paint",
      region: this.region,
      stroke: this.stroke,
      radius: this.radius,
    };
    this.stroke = [];
    this.dispatch(command);
    return command;
  }

  grow(radius: number): void {
    this.dispatch({ type: "grow", region: this.region, radius });
  }

  shrink(radius: number): void {
    this.dispatch({ type: "shrink", region: this.region, radius });
  }

  transfer(dst: number | string): void {
    this.dispatch({ type: "transfer", src: this.region, dst });
  }

  undo(): void {
    this.dispatch({ type: "undo_mask" });
  }

  /** Offline commands queue up; flushing replays them in order. */
  setOnline(online: boolean): void {
    this.online = online;
  }

  get pendingCount(): number {
    return this.queued.length;
  }

  flushQueue(): number {
    const replay = this.queued;
    this.queued = [];
    for (const command of replay) this.emit(command);
    return replay.length;
  }

  private dispatch(command: Command): void {
    if (!this.online) {
      this.queued.push(command);
      return;
    }
    this.emit(command);
  }
}

/** Palette colors matching the server's mask PNG palette. */
export const REGION_COLORS: [number, number, number][] = [
  [0, 0, 0], [204, 153, 102], [255, 204, 153], [64, 64, 192],
  [255, 255, 255], [224, 224, 224], [102, 51, 0], [153, 76, 0],
  [255, 178, 102], [255, 153, 51], [153, 0, 0], [204, 0, 0],
  [255, 51, 51], [51, 25, 0], [0, 102, 102], [255, 215, 0],
  [192, 192, 192], [229, 184, 143], [0, 76, 153],
];
