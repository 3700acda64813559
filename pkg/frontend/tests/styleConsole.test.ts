import { describe, expect, it } from "vitest";

import type { Command } from "../src/api";
import { ExplorerApi } from "../src/api";
import { RenderGallery, StyleConsole, clampT } from "../src/styleConsole";
import { StubServer } from "./stubServer";

const REGIONS = ["background", "skin", "hair"];

function collector(): { commands: Command[]; sink: (c: Command) => void } {
  const commands: Command[] = [];
  return { commands, sink: (c) => commands.push(c) };
}

describe("StyleConsole", () => {
  it("slider emits t within [0, 1] always", () => {
    const { commands, sink } = collector();
    const console_ = new StyleConsole(sink, REGIONS);
    console_.interpolate("current", "default", 0.5);
    console_.interpolate("current", "default", -3);
    console_.interpolate("current", "default", 42);
    console_.interpolate("current", "default", Number.NaN);
    for (const cmd of commands) {
      if (cmd.type !== "interpolate") throw new Error("expected interpolate");
      expect(cmd.t).toBeGreaterThanOrEqual(0);
      expect(cmd.t).toBeLessThanOrEqual(1);
    }
    expect((commands[0] as { t: number }).t).toBe(0.5);
    expect(clampT(0.25)).toBe(0.25);
  });

  it("mix command names the picked regions and source", () => {
    const { commands, sink } = collector();
    const console_ = new StyleConsole(sink, REGIONS);
    console_.mixRegions(["hair"], "guide");
    expect(commands[0]).toEqual({ type: "mix", regions: ["hair"], source: "guide" });
    expect(() => console_.mixRegions(["wings"], "guide")).toThrow(RangeError);
    expect(() => console_.mixRegions([9], "guide")).toThrow(RangeError);
  });

  it("jitter validates delta", () => {
    const { commands, sink } = collector();
    const console_ = new StyleConsole(sink, REGIONS);
    console_.jitter(0.05, 7);
    expect(commands[0]).toEqual({ type: "jitter", delta: 0.05, seed: 7 });
    expect(() => console_.jitter(-0.1, 7)).toThrow(RangeError);
  });

  it("sample 4 issues four sample+render pairs with distinct seeds", () => {
    const { commands, sink } = collector();
    const console_ = new StyleConsole(sink, REGIONS);
    console_.sampleVariants(4, 100);
    const samples = commands.filter((c) => c.type === "sample");
    const renders = commands.filter((c) => c.type === "render");
    expect(samples).toHaveLength(4);
    expect(renders).toHaveLength(4);
    const seeds = samples.map((c) => (c.type === "sample" ? c.seed : -1));
    expect(new Set(seeds).size).toBe(4);
  });
});

describe("RenderGallery", () => {
  it("addresses every render by its history index", () => {
    const gallery = new RenderGallery();
    gallery.add(0, "/r/0", "aaaa");
    gallery.add(1, "/r/1", "bbbb");
    gallery.add(2, "/r/2", "cccc");
    expect(gallery.byIndex(1)?.url).toBe("/r/1");
    expect(gallery.byIndex(2)?.inputsHash).toBe("cccc");
    expect(gallery.byIndex(9)).toBeUndefined();
    expect(gallery.latest?.index).toBe(2);
    expect(gallery.all.map((e) => e.index)).toEqual([0, 1, 2]);
  });
});

describe("render flow against the stub service", () => {
  it("maps render responses onto addressable gallery entries", async () => {
    const stub = new StubServer();
    const api = new ExplorerApi("http://svc", stub.fetch);
    const gallery = new RenderGallery();
    for (let i = 0; i < 3; i++) {
      const result = await api.sendCommand("stub-session", { type: "render" });
      expect(result.render_index).toBe(i);
      gallery.add(result.render_index!, api.renderUrl("stub-session", result.render_index!), result.inputs_hash!);
    }
    expect(gallery.byIndex(2)?.url).toBe("http://svc/sessions/stub-session/renders/2");
    expect(gallery.byIndex(1)?.inputsHash).toBe("hash-1");
  });

  it("surfaces 4xx errors as ApiError", async () => {
    const stub = new StubServer();
    const api = new ExplorerApi("http://svc", stub.fetch);
    await expect(
      api.sendCommand("stub-session", { type: "interpolate", t: 5 }),
    ).rejects.toThrowError(/HTTP 400/);
  });
});
