import { describe, expect, it } from "vitest";

import type { Command } from "../src/api";
import { ExplorerApi } from "../src/api";
import { MaskPainter } from "../src/maskPainter";
import { StubServer } from "./stubServer";

const REGIONS = ["background", "skin", "hair"];

function collector(): { commands: Command[]; sink: (c: Command) => void } {
  const commands: Command[] = [];
  return { commands, sink: (c) => commands.push(c) };
}

describe("MaskPainter", () => {
  it("emits a paint command with stroke points in image space", () => {
    const { commands, sink } = collector();
    const painter = new MaskPainter(sink, REGIONS, 32, 32);
    painter.setRegion("hair");
    painter.setRadius(2.5);
    painter.strokeStart(4, 6);
    painter.strokeMove(10, 6);
    painter.strokeEnd();
    expect(commands).toHaveLength(1);
    const cmd = commands[0];
    expect(cmd).toMatchObject({ type: "paint", region: 2, radius: 2.5 });
    if (cmd.type === "paint") {
      expect(cmd.stroke).toEqual([
        [6, 4],
        [6, 10],
      ]);
    }
  });

  it("zoom and pan do not alter emitted coordinates", () => {
    const { commands, sink } = collector();
    const painter = new MaskPainter(sink, REGIONS, 32, 32);
    painter.setRegion(1);
    painter.strokeStart(4, 6);
    painter.strokeEnd();

    painter.setViewport({ zoom: 4, offsetX: 100, offsetY: 50 });
    painter.strokeStart(100 + 4 * 4, 50 + 6 * 4); // same image point, zoomed view
    painter.strokeEnd();

    const [plain, zoomed] = commands;
    if (plain.type === "paint" && zoomed.type === "paint") {
      expect(zoomed.stroke).toEqual(plain.stroke);
    } else {
      throw new Error("expected paint commands");
    }
  });

  it("drops stroke points outside the image bounds", () => {
    const { commands, sink } = collector();
    const painter = new MaskPainter(sink, REGIONS, 16, 16);
    painter.strokeStart(-5, 2);
    painter.strokeMove(3, 3);
    painter.strokeMove(99, 99);
    painter.strokeEnd();
    const cmd = commands[0];
    if (cmd.type === "paint") {
      expect(cmd.stroke).toEqual([[3, 3]]);
    } else {
      throw new Error("expected a paint command");
    }
  });

  it("emits nothing when the whole stroke missed the image", () => {
    const { commands, sink } = collector();
    const painter = new MaskPainter(sink, REGIONS, 16, 16);
    painter.strokeStart(-5, -5);
    expect(painter.strokeEnd()).toBeNull();
    expect(commands).toHaveLength(0);
  });

  it("validates regions and radii", () => {
    const { sink } = collector();
    const painter = new MaskPainter(sink, REGIONS, 16, 16);
    expect(() => painter.setRegion("wings")).toThrow(RangeError);
    expect(() => painter.setRegion(7)).toThrow(RangeError);
    expect(() => painter.setRadius(0)).toThrow(RangeError);
  });

  it("emits grow/shrink/transfer/undo for the active region", () => {
    const { commands, sink } = collector();
    const painter = new MaskPainter(sink, REGIONS, 16, 16);
    painter.setRegion("skin");
    painter.grow(2);
    painter.shrink(1);
    painter.transfer("hair");
    painter.undo();
    expect(commands.map((c) => c.type)).toEqual([
      "grow",
      "shrink",
      "transfer",
      "undo_mask",
    ]);
    expect(commands[0]).toMatchObject({ region: 1, radius: 2 });
    expect(commands[2]).toMatchObject({ src: 1, dst: "hair" });
  });

  it("queues commands while offline and replays them in order", () => {
    const { commands, sink } = collector();
    const painter = new MaskPainter(sink, REGIONS, 16, 16);
    painter.setOnline(false);
    painter.grow(1);
    painter.shrink(1);
    expect(commands).toHaveLength(0);
    expect(painter.pendingCount).toBe(2);
    painter.setOnline(true);
    expect(painter.flushQueue()).toBe(2);
    expect(commands.map((c) => c.type)).toEqual(["grow", "shrink"]);
    expect(painter.pendingCount).toBe(0);
  });
});

describe("paint command payload over the wire", () => {
  it("arrives at the service endpoint with the exact JSON shape", async () => {
    const stub = new StubServer();
    const api = new ExplorerApi("http://svc", stub.fetch);
    const painter = new MaskPainter(
      (c) => void api.sendCommand("stub-session", c),
      REGIONS,
      32,
      32,
    );
    painter.setRegion("hair");
    painter.setRadius(3);
    painter.strokeStart(1, 2);
    painter.strokeEnd();
    await Promise.resolve(); // let the fetch settle
    const sent = stub.lastCommand();
    expect(sent).toEqual({
      type: "paint",
      region: 2,
      stroke: [[2, 1]],
      radius: 3,
    });
    expect(stub.requests[0].url).toBe("http://svc/sessions/stub-session/commands");
    expect(stub.requests[0].method).toBe("POST");
  });
});
