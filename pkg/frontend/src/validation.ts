/** Client-side feature-scale validation, mirroring the server's bounds. */

import type { FeatureForm } from "./types.js";

/** Scale bounds per feature; must stay identical to the server's scales. */
export const FEATURE_SCALES: Record<string, [number, number]> = {
  relatedness: [0, 5],
  specificity: [0, 5],
  richness: [0, 5],
  coherence: [0, 5],
  grammaticality: [0, 5],
  overall: [1, 5],
};

export const FEATURE_ORDER = [
  "relatedness",
  "specificity",
  "richness",
  "coherence",
  "grammaticality",
  "overall",
] as const;

/** Question and anchor wording shown next to each scale. */
export const FEATURE_ANCHORS: Record<string, { question: string; anchors: Record<number, string> }> = {
  relatedness: {
    question: "Is the CN related to the HS?",
    anchors: { 0: "No", 1: "Barely", 2: "Somewhat", 3: "More or less", 4: "Mostly", 5: "Yes" },
  },
  specificity: {
    question: "Does the CN provide detailed and precise information?",
    anchors: {
      0: "Not specific at all", 1: "Barely specific", 2: "Somewhat specific",
      3: "Moderately specific", 4: "Quite specific", 5: "Very specific",
    },
  },
  richness: {
    question: "Does the CN include a variety of vocabulary and sentence structures?",
    anchors: {
      0: "Very poor vocabulary and structure", 1: "Barely rich", 2: "Somewhat rich",
      3: "Moderately rich", 4: "Quite rich", 5: "Very rich",
    },
  },
  coherence: {
    question: "Is the CN logically organized and easy to understand?",
    anchors: {
      0: "Not coherent at all", 1: "Barely coherent", 2: "Somewhat coherent",
      3: "Moderately coherent", 4: "Quite coherent", 5: "Very coherent",
    },
  },
  grammaticality: {
    question: "Is the CN grammatically correct and free of errors?",
    anchors: {
      0: "Completely ungrammatical", 1: "Barely grammatical", 2: "Somewhat grammatical",
      3: "Moderately grammatical", 4: "Quite grammatical", 5: "Completely grammatical",
    },
  },
  overall: {
    question: "How suitable is the CN as a response?",
    anchors: {
      1: "Not suitable (borderline hate speech)",
      2: "Makes some acceptable points but not suitable",
      3: "Would be suitable with some modifications",
      4: "Good, though minor corrections may be needed",
      5: "Very good as a CN",
    },
  },
};

export function emptyFeatureForm(): FeatureForm {
  return {
    relatedness: null,
    specificity: null,
    richness: null,
    coherence: null,
    grammaticality: null,
    overall: null,
  };
}

/** Error message for one field value, or null when acceptable. */
export function validateFeatureValue(feature: string, value: number): string | null {
  const bounds = FEATURE_SCALES[feature];
  if (!bounds) return `unknown feature ${feature}`;
  const [lo, hi] = bounds;
  if (!Number.isInteger(value) || value < lo || value > hi) {
    return `${feature} must be an integer between ${lo} and ${hi}`;
  }
  return null;
}

/** All errors in a form; empty array means submittable. */
export function validateFeatureForm(form: FeatureForm): string[] {
  const errors: string[] = [];
  for (const feature of FEATURE_ORDER) {
    const value = form[feature as keyof FeatureForm];
    if (value === null || value === undefined) {
      errors.push(`${feature} is required`);
      continue;
    }
    const error = validateFeatureValue(feature, value);
    if (error) errors.push(error);
  }
  return errors;
}

export function isComplete(form: FeatureForm): boolean {
  return validateFeatureForm(form).length === 0;
}
