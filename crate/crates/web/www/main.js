// Built with `wasm-pack build crates/web --target web`, which writes ../pkg.
import init, { odeTrajectory, probabilitySurface, xorHeatmap } from "../pkg/gallrisk_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "out err" : "out";
}

function guarded(outId, fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      show(outId, String(e.message ?? e), true);
    }
  };
}

function axes(ctx, w, h, pad, xr, yr, xLabel, yLabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillText(xr[0].toPrecision(3), pad, h - pad + 14);
  ctx.fillText(xr[1].toPrecision(3), w - pad - 30, h - pad + 14);
  ctx.fillText(yr[1].toPrecision(3), 2, pad + 4);
  ctx.fillText(yr[0].toPrecision(3), 2, h - pad);
  ctx.fillText(xLabel, w / 2, h - 6);
  ctx.fillText(yLabel, pad + 6, pad - 6);
  return (x, y) => [
    pad + ((x - xr[0]) / (xr[1] - xr[0] || 1)) * (w - 2 * pad),
    h - pad - ((y - yr[0]) / (yr[1] - yr[0] || 1)) * (h - 2 * pad),
  ];
}

function line(ctx, map, xs, ys, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.lineWidth = 2;
  ctx.beginPath();
  xs.forEach((x, k) => {
    const [px, py] = map(x, ys[k]);
    k === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.lineWidth = 1;
}

function drawTrajectory() {
  const v = JSON.parse(odeTrajectory($("ode-slug").value, num("ode-y0"), num("ode-x0"), num("ode-x1"), num("ode-h")));
  const canvas = $("ode-plot");
  const ctx = canvas.getContext("2d");
  const all = v.rk4.concat(v.exact);
  const yr = [Math.min(...all), Math.max(...all)];
  const map = axes(ctx, canvas.width, canvas.height, 40, [v.x[0], v.x[v.x.length - 1]], yr, v.driver, v.state);
  line(ctx, map, v.x, v.exact, "#1f77b4");
  line(ctx, map, v.x, v.rk4, "#d62728", [6, 4]);
  show("ode-out", `${v.label}: ${v.x.length} points shown, max relative error of RK4 vs closed form ${v.max_rel_error.toExponential(2)}`);
}

function drawSurface() {
  const pair = $("sf-pair").value;
  const v = JSON.parse(probabilitySurface(pair, num("sf-b0"), num("sf-bx"), num("sf-by"), num("sf-g"), 40));
  const canvas = $("sf-plot");
  const ctx = canvas.getContext("2d");
  const palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
  // One curve per y value; HGB is thinned to six levels.
  const step = Math.max(1, Math.floor((v.ys.length - 1) / 5));
  const picks = v.ys.map((_, b) => b).filter((b) => b % step === 0 || b === v.ys.length - 1);
  const map = axes(ctx, canvas.width, canvas.height, 40, [v.xs[0], v.xs[v.xs.length - 1]], [0, 1], v.x_name, "P(gallstone)");
  const legend = [];
  picks.forEach((b, k) => {
    const color = palette[k % palette.length];
    line(ctx, map, v.xs, v.probability.map((row) => row[b]), color);
    legend.push(`${v.y_name}=${v.ys[b].toFixed(1)}`);
    ctx.fillStyle = color;
    ctx.fillText(legend[legend.length - 1], canvas.width - 120, 50 + 15 * k);
  });
  show("sf-out", `other covariates held at typical values; curves for ${legend.join(", ")}`);
}

function shade(value, max) {
  const t = max > 0 ? value / max : 0;
  const c = Math.round(255 - 200 * t);
  return `rgb(${c},${c},255)`;
}

function drawHeatmap() {
  show("hm-out", "fitting...");
  const started = performance.now();
  const v = JSON.parse(xorHeatmap(num("hm-n"), num("hm-noise"), num("hm-iter"), BigInt(num("hm-seed"))));
  const { features, mean } = v.heatmap;
  let max = 0;
  mean.forEach((row, a) => row.forEach((x, b) => { if (a !== b) max = Math.max(max, x); }));
  const table = document.createElement("table");
  table.className = "hm";
  table.innerHTML = "<tr><th></th>" + features.map((f) => `<th>${f}</th>`).join("") + "</tr>";
  mean.forEach((row, a) => {
    const tr = document.createElement("tr");
    tr.innerHTML = `<th>${features[a]}</th>` + row.map((x, b) =>
      a === b ? "<td></td>" : `<td style="background:${shade(x, max)}">${x.toFixed(3)}</td>`).join("");
    table.appendChild(tr);
  });
  $("hm-table").replaceChildren(table);
  const secs = ((performance.now() - started) / 1000).toFixed(1);
  show("hm-out",
    `top pair ${v.top_pair.join(" x ")}, held-out AUC ${v.held_out_auc.toFixed(3)}, ` +
    `mean tree depth ${v.mean_tree_depth.toFixed(2)}, ${secs}s`);
}

await init();
$("ode-go").addEventListener("click", guarded("ode-out", drawTrajectory));
$("sf-go").addEventListener("click", guarded("sf-out", drawSurface));
$("hm-go").addEventListener("click", guarded("hm-out", () => setTimeout(guarded("hm-out", drawHeatmap), 0)));
guarded("ode-out", drawTrajectory)();
guarded("sf-out", drawSurface)();
