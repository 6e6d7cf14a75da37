/** Browser bootstrap: login, tabs, keyboard shortcuts, DOM glue. */

import { ApiClient } from "./api.js";
import { loadDashboard } from "./dashboard.js";
import { FeatureSession } from "./features.js";
import {
  renderFeatureForm,
  renderFeatureMeans,
  renderIaa,
  renderLogin,
  renderProgress,
  renderRankTable,
  renderRetryBanner,
  renderTask,
} from "./render.js";
import { AnnotationSession } from "./session.js";
import type { FeatureForm } from "./types.js";

const app = document.getElementById("app") as HTMLElement;
const api = new ApiClient("");
const session = new AnnotationSession(api);
const features = new FeatureSession(api);

type Tab = "annotate" | "features" | "dashboard";
let tab: Tab = "annotate";
let loggedIn = false;

function nav(): string {
  const item = (id: Tab, label: string) =>
    `<button class="tab${tab === id ? " active" : ""}" data-tab="${id}">${label}</button>`;
  return `<nav>${item("annotate", "Annotate")}${item("features", "Features")}${item("dashboard", "Dashboard")}</nav>`;
}

function draw(view: string): void {
  app.innerHTML = loggedIn ? nav() + view : view;
  bind();
}

async function drawTab(): Promise<void> {
  if (tab === "annotate") {
    const view = session.view();
    if (view.payload === null) {
      await session.loadNext();
    }
    drawSession();
  } else if (tab === "features") {
    const view = features.view();
    if (view.payload === null) {
      await features.loadNext();
    }
    drawFeatures();
  } else {
    const data = await loadDashboard(api);
    draw(
      renderProgress(data.progress) +
        (data.rank ? renderRankTable(data.rank) : "<p>Ranking not available yet.</p>") +
        (data.iaa ? renderIaa(data.iaa) : "<p>IAA not available yet.</p>") +
        renderFeatureMeans(data.featureMeans),
    );
  }
}

function drawSession(): void {
  const view = session.view();
  let html = renderTask(view.payload!, view.status === "confirm-tie");
  if (view.status === "retry") {
    html += renderRetryBanner(view.error ?? "network failure");
  } else if (view.error) {
    html += `<p class="error">${view.error}</p>`;
  }
  draw(html);
}

function drawFeatures(): void {
  const view = features.view();
  let html = renderFeatureForm(view.payload!, view.form);
  if (view.error) html += `<p class="error">${view.error}</p>`;
  draw(html);
}

function bind(): void {
  app.querySelectorAll<HTMLButtonElement>("[data-tab]").forEach((button) => {
    button.onclick = () => {
      tab = button.dataset.tab as Tab;
      void drawTab();
    };
  });
  const on = (id: string, handler: () => void) => {
    const el = document.getElementById(id);
    if (el) (el as HTMLButtonElement).onclick = handler;
  };
  on("login-button", () => {
    const input = document.getElementById("token-input") as HTMLInputElement;
    void login(input.value.trim());
  });
  on("choose-a", () => void session.choose("A").then(drawSession));
  on("choose-b", () => void session.choose("B").then(drawSession));
  on("choose-tie", () => void session.choose("Tie").then(drawSession));
  on("confirm-tie", () => void session.confirmTie().then(drawSession));
  on("cancel-tie", () => {
    session.cancelTie();
    drawSession();
  });
  on("retry-submit", () => void session.retry().then(drawSession));
  on("submit-feature", () => void features.submit().then(drawFeatures));
  app.querySelectorAll<HTMLInputElement>(".scale input[type=radio]").forEach((input) => {
    input.onchange = () => {
      features.setValue(input.name as keyof FeatureForm, Number(input.value));
      drawFeatures();
    };
  });
}

async function login(token: string): Promise<void> {
  api.setToken(token);
  try {
    await api.nextTask(); // validates the token
  } catch {
    draw(renderLogin("That token was not accepted."));
    return;
  }
  loggedIn = true;
  tab = "annotate";
  await session.loadNext();
  drawSession();
}

document.addEventListener("keydown", (event) => {
  if (!loggedIn || tab !== "annotate") return;
  const target = event.target as HTMLElement | null;
  if (target && ["INPUT", "TEXTAREA"].includes(target.tagName)) return;
  const view = session.view();
  if (view.status === "task") {
    if (event.key === "a" || event.key === "A") void session.choose("A").then(drawSession);
    if (event.key === "b" || event.key === "B") void session.choose("B").then(drawSession);
    if (event.key === "t" || event.key === "T") void session.choose("Tie").then(drawSession);
  } else if (view.status === "confirm-tie" && event.key === "Enter") {
    void session.confirmTie().then(drawSession);
  }
});

draw(renderLogin());
