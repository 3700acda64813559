/** Style-space controls: per-region source picking, interpolation,
 * jitter, sampling, and the render gallery model. */

import type { Command } from "./api";
import type { CommandSink } from "./maskPainter";

export function clampT(t: number): number {
  if (Number.isNaN(t)) return 0;
  return Math.min(1, Math.max(0, t));
}

export class StyleConsole {
  constructor(
    private emit: CommandSink,
    public readonly regionNames: string[],
  ) {}

  /** Interpolation slider between two named styles; t is clamped by the
   * control bounds so the emitted value always lies in [0, 1]. */
  interpolate(a: string, b: string, t: number): Command {
    const command: Command = { type: "interpolate", a, b, t: clampT(t) };
    this.emit(command);
    return command;
  }

  /** Pull the named regions' rows from a source style (e.g. the guide). */
  mixRegions(regions: (number | string)[], source: string): Command {
    for (const r of regions) {
      if (typeof r === "string" && !this.regionNames.includes(r)) {
        throw new RangeError(`unknown region ${r}`);
      }
      if (typeof r === "number" && (r < 0 || r >= this.regionNames.length)) {
        throw new RangeError(`region index ${r} out of range`);
      }
    }
    const command: Command = { type: "mix", regions, source };
    this.emit(command);
    return command;
  }

  jitter(delta: number, seed: number): Command {
    if (delta < 0) throw new RangeError("delta must be >= 0");
    const command: Command = { type: "jitter", delta, seed };
    this.emit(command);
    return command;
  }

  snapshot(name: string): Command {
    const command: Command = { type: "snapshot", name };
    this.emit(command);
    return command;
  }

  render(): Command {
    const command: Command = { type: "render" };
    this.emit(command);
    return command;
  }

  /** Sample k style variants with distinct seeds, rendering each. */
  sampleVariants(k: number, baseSeed: number): Command[] {
    const commands: Command[] = [];
    for (let i = 0; i < k; i++) {
      const sample: Command = { type: "sample", seed: baseSeed + i };
      this.emit(sample);
      commands.push(sample);
      const render: Command = { type: "render" };
      this.emit(render);
      commands.push(render);
    }
    return commands;
  }
}

export interface GalleryEntry {
  index: number;
  url: string;
  inputsHash: string;
  label: string;
}

/** Append-only render history; every entry stays addressable by the
 * server-side history index it was created with. */
export class RenderGallery {
  private entries: GalleryEntry[] = [];

  add(index: number, url: string, inputsHash: string, label = ""): GalleryEntry {
    const entry = { index, url, inputsHash, label };
    this.entries.push(entry);
    return entry;
  }

  byIndex(index: number): GalleryEntry | undefined {
    return this.entries.find((e) => e.index === index);
  }

  get all(): readonly GalleryEntry[] {
    return this.entries;
  }

  get latest(): GalleryEntry | undefined {
    return this.entries[this.entries.length - 1];
  }
}
