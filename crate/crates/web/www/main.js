import init, { energyCurve, orbitalEntropies, runAfqmc } from "./pkg/qmcf_web.js";

const read = (section) => {
  const v = { element: "H" };
  for (const el of section.querySelectorAll("input, select")) {
    v[el.name] = el.type === "number" ? Number(el.value) : el.value;
  }
  return v;
};

function plot(canvas, series, { bars = false, hline = null } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pts = series.flatMap((s) => s.points);
  const ys = pts.map((p) => p[1]).concat(hline === null ? [] : [hline]);
  const xs = pts.map((p) => p[0]);
  let [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  if (bars) { x0 -= 0.5; x1 += 0.5; y0 = Math.min(0, y0); }
  if (y1 === y0) { y1 += 1e-3; y0 -= 1e-3; }
  const pad = 50;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad / 2 - ((y - y0) / (y1 - y0)) * (h - pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toFixed(4), 2, sy(y1) + 4);
  ctx.fillText(y0.toFixed(4), 2, sy(y0));
  if (hline !== null) {
    ctx.strokeStyle = "#999";
    ctx.setLineDash([4, 4]);
    ctx.beginPath(); ctx.moveTo(pad, sy(hline)); ctx.lineTo(w - pad, sy(hline)); ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const s of series) {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (bars) {
      for (const [x, y] of s.points) ctx.fillRect(sx(x) - 10, sy(y), 20, sy(y0) - sy(y));
    } else {
      ctx.beginPath();
      s.points.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
      ctx.stroke();
    }
    ctx.fillText(s.label, w - pad - 60, 14 + 14 * series.indexOf(s));
  }
}

function wire(id, compute) {
  const section = document.getElementById(id);
  const out = section.querySelector(".out");
  section.querySelector("button").addEventListener("click", () => {
    out.className = "out";
    out.textContent = "working...";
    setTimeout(() => {
      try {
        compute(read(section), section.querySelector("canvas"), out);
      } catch (e) {
        out.className = "out error";
        out.textContent = String(e);
      }
    }, 10);
  });
}

await init();

wire("curve", (v, canvas, out) => {
  const pts = JSON.parse(energyCurve(JSON.stringify(v)));
  plot(canvas, [
    { label: "RHF", color: "#c33", points: pts.map((p) => [p.r, p.rhf]) },
    { label: "FCI", color: "#33c", points: pts.map((p) => [p.r, p.fci]) },
  ]);
  const min = pts.reduce((a, b) => (b.fci < a.fci ? b : a));
  out.textContent = `FCI minimum near ${min.r.toFixed(3)} Å: ${min.fci.toFixed(6)} Ha`;
});

wire("entropy", (v, canvas, out) => {
  const r = JSON.parse(orbitalEntropies(JSON.stringify(v)));
  plot(canvas, [{ label: "S_p", color: "#393", points: r.entropies.map((s, i) => [i, s]) }], {
    bars: true,
    hline: r.threshold,
  });
  out.textContent = r.selected.length
    ? `active orbitals: ${r.selected.join(", ")}`
    : `no orbital exceeds the threshold ${r.threshold.toFixed(4)}`;
});

wire("afqmc", (v, canvas, out) => {
  const r = JSON.parse(runAfqmc(JSON.stringify(v)));
  plot(canvas, [{ label: "block E", color: "#333", points: r.blocks.map((e, i) => [i, e]) }], { hline: r.fci });
  out.textContent =
    `AFQMC ${r.mean.toFixed(5)} ± ${r.stderr.toFixed(5)} Ha\n` +
    `trial ${r.trial_energy.toFixed(5)}   RHF ${r.rhf.toFixed(5)}   FCI ${r.fci.toFixed(5)} (dashed)`;
});
