import init, { simulate_example, estimator_demo, decay_demo } from "./pkg/heol_demo.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

// series: [{ name, x, y, dashed? }]
function plot(canvas, series, logScale = false) {
  const dpr = window.devicePixelRatio || 1;
  canvas.width = canvas.clientWidth * dpr;
  canvas.height = canvas.clientHeight * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  const w = canvas.clientWidth, h = canvas.clientHeight, pad = 44;
  ctx.clearRect(0, 0, w, h);

  const tf = (v) => (logScale ? Math.log10(Math.max(Math.abs(v), 1e-16)) : v);
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    s.x.forEach((x, i) => {
      const y = tf(s.y[i]);
      if (!Number.isFinite(y)) return;
      xmin = Math.min(xmin, x); xmax = Math.max(xmax, x);
      ymin = Math.min(ymin, y); ymax = Math.max(ymax, y);
    });
  }
  if (!Number.isFinite(xmin)) return;
  if (ymax - ymin < 1e-12) { ymin -= 1; ymax += 1; }
  const m = 0.05 * (ymax - ymin);
  ymin -= m; ymax += m;
  const px = (x) => pad + ((x - xmin) / (xmax - xmin || 1)) * (w - pad - 10);
  const py = (y) => h - 20 - ((y - ymin) / (ymax - ymin)) * (h - 30);

  ctx.strokeStyle = "#999"; ctx.fillStyle = "#555"; ctx.font = "11px sans-serif";
  ctx.beginPath(); ctx.moveTo(pad, 10); ctx.lineTo(pad, h - 20); ctx.lineTo(w - 10, h - 20); ctx.stroke();
  ctx.fillText((logScale ? "1e" : "") + (+ymax.toPrecision(3)), 2, 14);
  ctx.fillText((logScale ? "1e" : "") + (+ymin.toPrecision(3)), 2, h - 22);
  ctx.fillText(`t = ${xmin.toFixed(1)}`, pad, h - 5);
  ctx.fillText(`${xmax.toFixed(1)} s`, w - 50, h - 5);

  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.setLineDash(s.dashed ? [5, 4] : []);
    ctx.beginPath();
    let pen = false;
    s.x.forEach((x, i) => {
      const y = tf(s.y[i]);
      if (!Number.isFinite(y)) { pen = false; return; }
      pen ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
      pen = true;
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.name, w - 150, 14 + 13 * k);
  });
  ctx.setLineDash([]);
}

function wire(id, run) {
  const root = document.getElementById(id);
  const inputs = root.querySelectorAll("input");
  const update = () => {
    const v = {};
    inputs.forEach((el) => {
      v[el.name] = el.type === "checkbox" ? el.checked : Number(el.value);
      const out = el.nextElementSibling;
      if (out && out.tagName === "OUTPUT") out.textContent = el.value;
    });
    const trace = run(v);
    const col = (n) => trace.column(n);
    const summary = root.querySelector(".summary");
    const err = trace.error();
    summary.textContent = err ? `stopped: ${err}` : trace.summary();
    summary.classList.toggle("error", !!err);
    if (!trace.is_empty()) {
      root.querySelectorAll("canvas").forEach((c) => draw(c.dataset.plot, c, col));
    }
    trace.free();
  };
  inputs.forEach((el) => el.addEventListener("change", update));
  update();
}

function draw(which, canvas, col) {
  const t = col("t");
  switch (which) {
    case "y1":
    case "y2":
      plot(canvas, [
        { name: which, x: t, y: col(which) },
        { name: `${which}*`, x: t, y: col(`${which}_ref`), dashed: true },
      ]);
      break;
    case "F":
      plot(canvas, [
        { name: "F", x: t, y: col("F_true"), dashed: true },
        { name: "F estimate", x: t, y: col("F_est") },
      ]);
      break;
    case "dy":
      plot(canvas, [
        { name: "|Δy| (log10)", x: t, y: col("dy") },
        { name: "e^(−K_P t)", x: t, y: col("envelope"), dashed: true },
      ], true);
      break;
  }
}

await init();
wire("example", (v) =>
  simulate_example(v.scaling, v.perturbed, v.feedback, v.pole1, v.pole2, v.window, v.noise, 7));
wire("estimator", (v) => estimator_demo(v.order, v.window, v.noise, 7));
wire("decay", (v) => decay_demo(v.kp, v.disturbance, v.alpha, v.window));
