import init, { equilibrium, learn, probe } from "./pkg/sandbox_mfg_web.js";

// Diagonal moves in the order the model uses: (dx, dy).
const ARROWS = ["↖", "↗", "↙", "↘"];

const num = (id) => Number(document.getElementById(id).value);
const out = (id) => document.getElementById(id);

function showError(target, e) {
  target.innerHTML = `<p class="err">${e.message ?? e}</p>`;
}

function heat(p, max) {
  const t = Math.min(1, p / max);
  const r = Math.round(255 - 200 * t), g = Math.round(255 - 140 * t), b = 255;
  return `rgb(${r},${g},${b})`;
}

function gridView(side, values, favorable, extra) {
  const max = Math.max(...values);
  const cells = values.map((v, s) => {
    const fav = favorable.includes(s) ? " fav" : "";
    return `<div class="cell${fav}" style="background:${heat(v, max)}">${v.toFixed(3)}${extra ? extra(s) : ""}</div>`;
  });
  return `<div class="grid" style="grid-template-columns: repeat(${side}, 3.2rem)">${cells.join("")}</div>`;
}

function solve() {
  const target = out("eq-out");
  try {
    const r = JSON.parse(equilibrium(num("eq-side"), num("eq-p"), num("eq-c"), num("eq-lambda"), num("eq-rho")));
    const best = (s) => {
      const row = r.policy[s];
      const a = row.indexOf(Math.max(...row));
      return `<span class="arrow">${ARROWS[a]}</span>`;
    };
    target.innerHTML =
      gridView(r.side, r.mean_field, r.favorable, best) +
      `<p class="muted">Population share per cell, with the most likely move. ` +
      `${r.iterations} iterations, residual ${r.residual.toExponential(2)}${r.converged ? "" : " (not converged)"}.</p>`;
  } catch (e) {
    showError(target, e);
  }
}

function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  const n = Math.max(...series.map((s) => s.values.length));
  const ymax = Math.max(1e-9, ...series.flatMap((s) => s.values)) * 1.05;
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - 10, h - pad);
  ctx.stroke();
  ctx.fillText(ymax.toFixed(2), 2, pad / 2 + 8);
  ctx.fillText("0", 20, h - pad);
  ctx.fillText("episode", w / 2, h - 8);
  ctx.fillText(String(n), w - 30, h - pad + 14);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.values.forEach((v, i) => {
      const x = pad + ((w - pad - 10) * i) / Math.max(1, n - 1);
      const y = h - pad - ((h - 1.5 * pad) * v) / ymax;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
}

function runLearner() {
  const target = out("ln-out");
  target.textContent = "running…";
  // Let the status paint before the synchronous run blocks the page.
  setTimeout(() => {
    try {
      const r = JSON.parse(
        learn(num("ln-side"), num("ln-lambda"), num("ln-k"), num("ln-t"), BigInt(num("ln-seed")),
          out("ln-carried").checked),
      );
      target.innerHTML =
        `<p>Averaged output: mean-field L1 error <b>${r.mean_field_l1.toFixed(4)}</b>, ` +
        `policy TV error <b>${r.policy_tv.toFixed(4)}</b>.</p>`;
      plot(out("ln-plot"), [
        { values: r.e_mu, color: "#1f5fbf" },
        { values: r.e_pi, color: "#d9822b" },
      ]);
    } catch (e) {
      showError(target, e);
    }
  }, 20);
}

function runProbe() {
  const target = out("pr-out");
  try {
    const r = JSON.parse(probe(num("pr-side"), num("pr-lambda"), num("pr-rho"), num("pr-pairs"), BigInt(7)));
    const row = (name, v) => `<tr><th>${name}</th><td>${v.toFixed(4)}</td></tr>`;
    target.innerHTML =
      `<table>${row("d1 (optimality map)", r.d1_hat)}${row("d2 (consistency in policy)", r.d2_hat)}` +
      `${row("d3 (consistency in mean-field)", r.d3_hat)}${row("d = d1 d2 + d3", r.d_hat)}</table>` +
      `<p>${r.contraction_verified ? "Sampled constants indicate a contraction." : "No contraction observed (d ≥ 1)."} ` +
      `<span class="muted">Sampling can only under-estimate the true constants.</span></p>`;
  } catch (e) {
    showError(target, e);
  }
}

await init();
out("eq-run").addEventListener("click", solve);
out("ln-run").addEventListener("click", runLearner);
out("pr-run").addEventListener("click", runProbe);
solve();
