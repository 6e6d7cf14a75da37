/** Pure HTML renderers; every view is a string so tests can audit output.

Annotator-facing views render only the fields of the (blind) task
payloads: texts, ids, progress. System identities exist solely in
coordinator views.
*/

import type {
  FeatureMeans,
  FeatureTaskPayload,
  HumanRankReport,
  IaaReport,
  ProgressReport,
  TaskPayload,
} from "./types.js";
import type { FeatureForm } from "./types.js";
import { FEATURE_ANCHORS, FEATURE_ORDER, FEATURE_SCALES } from "./validation.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export const CONTENT_WARNING =
  "Content warning: tasks contain hate speech, shown for evaluation only.";

const TIE_GUIDELINE =
  "A tie is only for the case where neither counter-narrative adequately addresses the hate speech.";

export function renderLogin(error: string | null = null): string {
  return `
<section class="login">
  <h1>Annotation session</h1>
  <p class="warning">${CONTENT_WARNING}</p>
  ${error ? `<p class="error">${escapeHtml(error)}</p>` : ""}
  <label>Session token <input id="token-input" type="password" autocomplete="off"></label>
  <button id="login-button">Start</button>
</section>`;
}

export function renderTask(payload: TaskPayload, confirmTie = false): string {
  if (payload.done || !payload.task) {
    return `
<section class="done">
  <h2>All tasks complete</h2>
  <p>You answered ${payload.progress.answered} of ${payload.progress.assigned} assigned comparisons. Thank you.</p>
</section>`;
  }
  const task = payload.task;
  const progress = payload.progress;
  return `
<section class="task" data-tournament="${escapeHtml(task.tournament_id)}">
  <header>
    <span class="progress">${progress.answered + 1} / ${progress.assigned}</span>
    <span class="guidelines">guidelines ${escapeHtml(task.guidelines_version)}</span>
  </header>
  <p class="warning">${CONTENT_WARNING}</p>
  <article class="hs"><h3>Hate speech</h3><p>${escapeHtml(task.hs_text)}</p></article>
  <div class="candidates">
    <article class="cn"><h3>Counter-narrative A</h3><p>${escapeHtml(task.cn_a)}</p></article>
    <article class="cn"><h3>Counter-narrative B</h3><p>${escapeHtml(task.cn_b)}</p></article>
  </div>
  <p class="hint">Pick the more effective counter-narrative. Weigh specificity and informative content, and penalize false information. Shortcuts: A, B, T.</p>
  ${
    confirmTie
      ? `<div class="confirm-tie">
    <p>${TIE_GUIDELINE}</p>
    <button id="confirm-tie">Confirm tie</button>
    <button id="cancel-tie">Back</button>
  </div>`
      : `<div class="choices">
    <button id="choose-a">A is better</button>
    <button id="choose-b">B is better</button>
    <button id="choose-tie">Tie (both inadequate)</button>
  </div>`
  }
</section>`;
}

export function renderRetryBanner(message: string): string {
  return `
<div class="retry-banner">
  <p>${escapeHtml(message)}</p>
  <button id="retry-submit">Retry submission</button>
</div>`;
}

export function renderFeatureForm(payload: FeatureTaskPayload, form: FeatureForm): string {
  if (payload.done || !payload.task) {
    return `
<section class="done">
  <h2>All ratings complete</h2>
  <p>${payload.progress.answered} of ${payload.progress.assigned} forms submitted. Thank you.</p>
</section>`;
  }
  const task = payload.task;
  const rows = FEATURE_ORDER.map((feature) => {
    const [lo, hi] = FEATURE_SCALES[feature];
    const meta = FEATURE_ANCHORS[feature];
    const options = [];
    for (let value = lo; value <= hi; value += 1) {
      const selected = form[feature as keyof FeatureForm] === value;
      options.push(
        `<label class="anchor${selected ? " selected" : ""}">
          <input type="radio" name="${feature}" value="${value}" ${selected ? "checked" : ""}>
          <span>${value}: ${escapeHtml(meta.anchors[value] ?? String(value))}</span>
        </label>`,
      );
    }
    return `
  <fieldset class="scale" data-feature="${feature}">
    <legend>${feature[0].toUpperCase()}${feature.slice(1)} — ${escapeHtml(meta.question)}</legend>
    ${options.join("\n")}
  </fieldset>`;
  });
  const complete = FEATURE_ORDER.every(
    (feature) => form[feature as keyof FeatureForm] !== null,
  );
  return `
<section class="feature-task" data-task="${escapeHtml(task.task_id)}">
  <header>
    <span class="progress">${payload.progress.answered + 1} / ${payload.progress.assigned}</span>
    <span class="guidelines">guidelines ${escapeHtml(task.guidelines_version)}</span>
  </header>
  <p class="warning">${CONTENT_WARNING}</p>
  <article class="hs"><h3>Hate speech</h3><p>${escapeHtml(task.hs_text)}</p></article>
  <article class="cn"><h3>Counter-narrative</h3><p>${escapeHtml(task.cn_text)}</p></article>
  ${rows.join("\n")}
  <button id="submit-feature" ${complete ? "" : "disabled"}>Submit rating</button>
</section>`;
}

// ---------------------------------------------------------------------------
// Coordinator views (system identities are intentionally visible here)

export function renderProgress(report: ProgressReport): string {
  const rows = Object.entries(report.annotators)
    .map(
      ([annotator, p]) =>
        `<tr><td>${escapeHtml(annotator)}</td><td>${p.answered}</td><td>${p.assigned}</td></tr>`,
    )
    .join("\n");
  return `
<section class="progress-report">
  <h2>Progress</h2>
  <p>${report.tournaments} tournaments (${report.shared} shared), ${report.feature_ratings} feature ratings.</p>
  <table><thead><tr><th>Annotator</th><th>Answered</th><th>Assigned</th></tr></thead>
  <tbody>${rows}</tbody></table>
</section>`;
}

export function renderIaa(report: IaaReport): string {
  const scopes = Object.keys(report).sort((a, b) =>
    a === "all" ? -1 : b === "all" ? 1 : a.localeCompare(b),
  );
  const panels = scopes.map((scope) => {
    const data = report[scope];
    const rows = data.pairs
      .map(
        (pair) =>
          `<tr><td>${escapeHtml(pair.annotator_a)} / ${escapeHtml(pair.annotator_b)}</td>
           <td>${pair.kappa === null ? "undefined" : pair.kappa.toFixed(2)}</td>
           <td>${pair.n_items}</td></tr>`,
      )
      .join("\n");
    const mean = data.mean_kappa === null ? "—" : data.mean_kappa.toFixed(2);
    return `
  <div class="iaa-panel">
    <h3>${escapeHtml(scope)}</h3>
    <p>mean kappa: <strong>${mean}</strong></p>
    <table><thead><tr><th>Pair</th><th>Kappa</th><th>Items</th></tr></thead>
    <tbody>${rows}</tbody></table>
  </div>`;
  });
  return `<section class="iaa"><h2>Inter-annotator agreement</h2><div class="panels">${panels.join("\n")}</div></section>`;
}

export function renderRankTable(report: HumanRankReport): string {
  const rows = report.ranking
    .map(
      (row) =>
        `<tr><td>${row.rank}</td><td>${escapeHtml(row.system_id)}</td><td>${row.score.toFixed(2)}</td></tr>`,
    )
    .join("\n");
  return `
<section class="rank">
  <h2>Human ranking</h2>
  <p>${report.scoreboard.total_tournaments} judged tournaments.</p>
  <table><thead><tr><th>Rank</th><th>System</th><th>Score</th></tr></thead>
  <tbody>${rows}</tbody></table>
</section>`;
}

export function renderFeatureMeans(means: FeatureMeans): string {
  const systems = Object.keys(means).sort();
  const rows = systems
    .map((system) => {
      const cells = FEATURE_ORDER.map(
        (feature) => `<td>${(means[system][feature] ?? 0).toFixed(2)}</td>`,
      ).join("");
      return `<tr><td>${escapeHtml(system)}</td>${cells}</tr>`;
    })
    .join("\n");
  const headers = FEATURE_ORDER.map((f) => `<th>${f}</th>`).join("");
  return `
<section class="feature-means">
  <h2>Feature means</h2>
  <table><thead><tr><th>System</th>${headers}</tr></thead>
  <tbody>${rows}</tbody></table>
</section>`;
}
