import { describe, expect, it } from "vitest";

import {
  FEATURE_ORDER,
  FEATURE_SCALES,
  emptyFeatureForm,
  isComplete,
  validateFeatureForm,
  validateFeatureValue,
} from "../src/validation.js";

describe("feature scales", () => {
  it("covers the six features with the documented bounds", () => {
    expect(Object.keys(FEATURE_SCALES).sort()).toEqual([...FEATURE_ORDER].sort());
    for (const feature of ["relatedness", "specificity", "richness", "coherence", "grammaticality"]) {
      expect(FEATURE_SCALES[feature]).toEqual([0, 5]);
    }
    expect(FEATURE_SCALES.overall).toEqual([1, 5]);
  });

  it("rejects values outside each scale", () => {
    expect(validateFeatureValue("relatedness", 0)).toBeNull();
    expect(validateFeatureValue("relatedness", 5)).toBeNull();
    expect(validateFeatureValue("relatedness", 6)).toMatch(/between 0 and 5/);
    expect(validateFeatureValue("relatedness", -1)).toMatch(/between 0 and 5/);
    expect(validateFeatureValue("overall", 0)).toMatch(/between 1 and 5/);
    expect(validateFeatureValue("overall", 1)).toBeNull();
    expect(validateFeatureValue("coherence", 2.5)).toMatch(/integer/);
  });

  it("keeps partial forms unsubmittable", () => {
    const form = emptyFeatureForm();
    expect(isComplete(form)).toBe(false);
    form.relatedness = 5;
    form.specificity = 4;
    form.richness = 3;
    form.coherence = 2;
    form.grammaticality = 1;
    expect(isComplete(form)).toBe(false); // overall still missing
    form.overall = 1;
    expect(isComplete(form)).toBe(true);
  });

  it("reports every problem in an invalid form", () => {
    const form = emptyFeatureForm();
    form.relatedness = 9;
    form.overall = 0;
    const errors = validateFeatureForm(form);
    expect(errors.some((e) => e.startsWith("relatedness"))).toBe(true);
    expect(errors.some((e) => e.startsWith("overall"))).toBe(true);
    expect(errors.some((e) => e.includes("required"))).toBe(true);
  });
});
