import { describe, expect, it } from "vitest";

import {
  CONTENT_WARNING,
  escapeHtml,
  renderFeatureForm,
  renderFeatureMeans,
  renderIaa,
  renderLogin,
  renderRankTable,
  renderRetryBanner,
  renderTask,
} from "../src/render.js";
import { emptyFeatureForm } from "../src/validation.js";
import type { FeatureTaskPayload, TaskPayload } from "../src/types.js";

const SYSTEM_IDS = ["zephyr-zs", "mistral-zs", "gold standard", "sysA", "sysB"];

const taskPayload: TaskPayload = {
  done: false,
  task: {
    tournament_id: "t000007",
    hs_text: "a hostile <b>claim</b>",
    cn_a: "calm reply one",
    cn_b: "calm reply two",
    guidelines_version: "a1",
  },
  progress: { assigned: 8, answered: 3, remaining: 5 },
};

const featurePayload: FeatureTaskPayload = {
  done: false,
  task: {
    task_id: "ft0001",
    hs_text: "a hostile claim",
    cn_text: "a calm reply",
    scales: {
      relatedness: [0, 5], specificity: [0, 5], richness: [0, 5],
      coherence: [0, 5], grammaticality: [0, 5], overall: [1, 5],
    },
    guidelines_version: "a1",
  },
  progress: { assigned: 4, answered: 1 },
};

describe("annotator-facing renders", () => {
  it("task view shows texts, progress, warning, and no system identity", () => {
    const html = renderTask(taskPayload);
    expect(html).toContain("a hostile &lt;b&gt;claim&lt;/b&gt;");
    expect(html).toContain("calm reply one");
    expect(html).toContain("calm reply two");
    expect(html).toContain("4 / 8"); // answered+1 of assigned
    expect(html).toContain("guidelines a1");
    expect(html).toContain(CONTENT_WARNING);
    for (const system of SYSTEM_IDS) {
      expect(html).not.toContain(system);
    }
    expect(html.toLowerCase()).not.toContain("system");
  });

  it("tie needs its confirmation step with the inadequacy guideline", () => {
    const normal = renderTask(taskPayload);
    expect(normal).toContain("choose-tie");
    const confirming = renderTask(taskPayload, true);
    expect(confirming).toContain("confirm-tie");
    expect(confirming).toContain("cancel-tie");
    expect(confirming.toLowerCase()).toContain("neither counter-narrative");
    expect(confirming).not.toContain("choose-a");
  });

  it("done view reports the completed count", () => {
    const html = renderTask({
      done: true, task: null,
      progress: { assigned: 8, answered: 8, remaining: 0 },
    });
    expect(html).toContain("8 of 8");
  });

  it("feature form renders six scales with anchors and gates submit", () => {
    const empty = renderFeatureForm(featurePayload, emptyFeatureForm());
    expect(empty).toContain("Is the CN related to the HS?");
    expect(empty).toContain("Not suitable (borderline hate speech)");
    expect(empty).toContain('data-feature="grammaticality"');
    expect(empty).toContain("<button id=\"submit-feature\" disabled");
    for (const system of SYSTEM_IDS) {
      expect(empty).not.toContain(system);
    }

    const form = emptyFeatureForm();
    form.relatedness = 5;
    form.specificity = 4;
    form.richness = 3;
    form.coherence = 5;
    form.grammaticality = 4;
    form.overall = 4;
    const filled = renderFeatureForm(featurePayload, form);
    expect(filled).toContain('<button id="submit-feature" >');
  });

  it("retry banner and login escape their content", () => {
    expect(renderRetryBanner("lost <conn>")).toContain("lost &lt;conn&gt;");
    expect(renderLogin("bad <token>")).toContain("bad &lt;token&gt;");
    expect(renderLogin()).toContain(CONTENT_WARNING);
  });
});

describe("coordinator renders", () => {
  it("rank table mirrors the server report", () => {
    const html = renderRankTable({
      scoreboard: {
        points: { "zephyr-zs": 6, "mistral-zs": 4 },
        total_tournaments: 10,
        normalized_share: { "zephyr-zs": 60, "mistral-zs": 40 },
      },
      ranking: [
        { rank: 1, system_id: "zephyr-zs", score: 60 },
        { rank: 2, system_id: "mistral-zs", score: 40 },
      ],
    });
    expect(html).toContain("zephyr-zs");
    expect(html).toContain("60.00");
    expect(html).toContain("10 judged tournaments");
  });

  it("IAA panels show per-dataset means side by side", () => {
    const html = renderIaa({
      all: { pairs: [{ annotator_a: "a1", annotator_b: "a2", kappa: 0.5, n_items: 6 }], mean_kappa: 0.5 },
      corpusA: { pairs: [{ annotator_a: "a1", annotator_b: "a2", kappa: 0.42, n_items: 3 }], mean_kappa: 0.42 },
      corpusB: { pairs: [{ annotator_a: "a1", annotator_b: "a2", kappa: 0.58, n_items: 3 }], mean_kappa: 0.58 },
    });
    expect(html).toContain("corpusA");
    expect(html).toContain("0.42");
    expect(html).toContain("corpusB");
    expect(html).toContain("0.58");
    const posA = html.indexOf("corpusA");
    const posAll = html.indexOf(">all<");
    expect(posAll).toBeGreaterThan(-1);
    expect(posAll).toBeLessThan(posA);
  });

  it("feature means table formats per-system rows", () => {
    const html = renderFeatureMeans({
      "zephyr-zs": {
        relatedness: 4.95, specificity: 4.25, richness: 4.0,
        coherence: 5.0, grammaticality: 5.0, overall: 4.25,
      },
    });
    expect(html).toContain("zephyr-zs");
    expect(html).toContain("4.25");
    expect(html).toContain("5.00");
  });
});

describe("escapeHtml", () => {
  it("escapes the five significant characters", () => {
    expect(escapeHtml(`<a href="x">'&'</a>`)).toBe(
      "&lt;a href=&quot;x&quot;&gt;&#39;&amp;&#39;&lt;/a&gt;",
    );
  });
});
