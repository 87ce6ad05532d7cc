export * from "./artifacts.js";
export * from "./csv.js";
export * from "./scale.js";
export * from "./color.js";
export { renderRaster } from "./render/raster.js";
export { renderSpectrum } from "./render/spectrum.js";
export { renderField } from "./render/field.js";
export { renderBasin } from "./render/basin.js";
export { renderClocks } from "./render/clocks.js";
export { renderScaling } from "./render/scaling.js";
