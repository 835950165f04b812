import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { expandInputs, main, parseArgs, render } from "../src/cli.js";

const FIXTURES = join(__dirname, "..", "fixtures");

describe("parseArgs", () => {
  it("parses labeled inputs", () => {
    const opts = parseArgs(["--kind", "sweep-lines", "--metric", "throughput",
                            "--in", "a.csv=Policy A", "--in", "b.csv",
                            "--out", "fig.svg"]);
    expect(opts.inputs).toEqual([{ path: "a.csv", label: "Policy A" },
                                 { path: "b.csv", label: "" }]);
    expect(opts.metric).toBe("throughput");
  });

  it("requires a metric for sweep figures but not panels", () => {
    expect(() => parseArgs(["--kind", "sweep-lines", "--in", "a", "--out", "b"]))
      .toThrow(/--metric/);
    const opts = parseArgs(["--kind", "timeseries-panel", "--in", "a",
                            "--out", "b"]);
    expect(opts.kind).toBe("timeseries-panel");
  });

  it("rejects unknown kinds and arguments", () => {
    expect(() => parseArgs(["--kind", "pie", "--in", "a", "--out", "b"]))
      .toThrow(/--kind/);
    expect(() => parseArgs(["--frobnicate"])).toThrow(/unknown argument/);
  });
});

describe("expandInputs", () => {
  it("expands a trailing glob against the directory", () => {
    const expanded = expandInputs([{ path: join(FIXTURES, "sweep_*.csv"),
                                     label: "" }]);
    const names = expanded.map((e) => e.path.split("/").pop());
    expect(names).toEqual(["sweep_hetero.csv", "sweep_homogeneous.csv",
                           "sweep_static.csv"]);
  });

  it("errors when nothing matches", () => {
    expect(() => expandInputs([{ path: join(FIXTURES, "zzz_*.csv"), label: "" }]))
      .toThrow(/no files match/);
  });
});

describe("main", () => {
  it("renders a sweep figure end to end", () => {
    const out = join(mkdtempSync(join(tmpdir(), "plots-")), "fig.svg");
    const code = main(["--kind", "sweep-lines", "--metric", "slo_satisfaction",
                       "--in", `${join(FIXTURES, "sweep_homogeneous.csv")}=adaptive`,
                       "--out", out]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("</svg>");
  });

  it("renders a time-series panel end to end", () => {
    const out = join(mkdtempSync(join(tmpdir(), "plots-")), "panel.svg");
    const code = main(["--kind", "timeseries-panel",
                       "--in", join(FIXTURES, "timeseries.csv"), "--out", out]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("running accuracy");
  });

  it("re-rendering produces identical bytes and no file on error", () => {
    const dir = mkdtempSync(join(tmpdir(), "plots-"));
    const out1 = join(dir, "a.svg");
    const out2 = join(dir, "b.svg");
    const args = ["--kind", "tier-grid", "--metric", "slo_satisfaction",
                  "--in", join(FIXTURES, "sweep_hetero.csv")];
    expect(main([...args, "--out", out1])).toBe(0);
    expect(main([...args, "--out", out2])).toBe(0);
    expect(readFileSync(out1)).toEqual(readFileSync(out2));

    const empty = join(dir, "empty.csv");
    writeFileSync(empty, "devices,seed_count,metric,mean,min,max\n");
    const bad = join(dir, "never.svg");
    expect(main(["--kind", "sweep-lines", "--metric", "throughput",
                 "--in", empty, "--out", bad])).toBe(1);
    expect(() => readFileSync(bad)).toThrow();
  });
});
