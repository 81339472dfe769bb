import init, { augment_sequence, typo_set, noise_sweep } from "./pkg/aelif_lab_demo.js";

const CATEGORIES = ["backpack", "candle", "dog_data", "cat", "colorful_sneaker", "dog2", "dog3",
  "backpack_dog", "clock", "vase", "teapot"];

const $ = (id) => document.getElementById(id);

function call(fn, ...args) {
  const out = JSON.parse(fn(...args));
  if (out && out.error) throw new Error(out.error);
  return out;
}

function color(v, scale) {
  const t = Math.max(-1, Math.min(1, v / scale));
  const r = t > 0 ? 255 : Math.round(255 * (1 + t));
  const b = t < 0 ? 255 : Math.round(255 * (1 - t));
  const g = Math.round(255 * (1 - Math.abs(t)));
  return `rgb(${r},${g},${b})`;
}

function drawHeatmap(res) {
  const c = $("aug-canvas"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const rows = res.before.length, cols = res.before[0].length;
  const labelW = 70, gap = 40;
  const cell = Math.min(12, (c.height - 20) / rows, (c.width - 2 * labelW - gap) / (2 * cols));
  const scale = Math.max(...res.before.flat().map(Math.abs));
  const changed = new Set(res.positions);
  const panel = (data, x0) => {
    data.forEach((row, i) => {
      row.forEach((v, j) => {
        ctx.fillStyle = color(v, scale);
        ctx.fillRect(x0 + j * cell, 10 + i * cell, cell, cell);
      });
      if (changed.has(i)) {
        ctx.strokeStyle = "#000";
        ctx.strokeRect(x0, 10 + i * cell, cols * cell, cell);
      }
    });
  };
  ctx.fillStyle = "#222";
  ctx.font = `${Math.max(8, cell - 2)}px monospace`;
  res.tokens.forEach((t, i) => ctx.fillText(t, 0, 10 + (i + 0.8) * cell));
  panel(res.before, labelW);
  panel(res.after, labelW + cols * cell + gap);
}

function runAugment() {
  $("aug-p-val").textContent = $("aug-p").value;
  try {
    const res = call(augment_sequence, $("aug-prompt").value, $("aug-mode").value, +$("aug-p").value,
      +$("aug-mu").value, +$("aug-sigma").value, BigInt($("aug-seed").value || 0));
    $("aug-err").textContent = `${res.positions.length} of ${res.tokens.length} positions changed`;
    $("aug-err").className = "";
    drawHeatmap(res);
  } catch (e) {
    $("aug-err").textContent = e.message;
    $("aug-err").className = "err";
  }
}

function runTypos() {
  const table = $("typo-table");
  table.innerHTML = "";
  try {
    const rows = call(typo_set, $("typo-template").value, +$("typo-count").value, +$("typo-edits").value,
      BigInt($("typo-seed").value || 0));
    $("typo-err").textContent = "";
    table.insertAdjacentHTML("beforeend", "<tr><th>prompt</th><th>edit distance</th><th>tokens</th></tr>");
    for (const r of rows) {
      const tr = document.createElement("tr");
      for (const v of [r.prompt, r.distance, r.tokens]) {
        const td = document.createElement("td");
        td.textContent = v;
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
  } catch (e) {
    $("typo-err").textContent = e.message;
  }
}

function drawSweep(res) {
  const c = $("sweep-canvas"), ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pad = 40, w = c.width / 2 - 2 * pad, h = c.height - 2 * pad;
  // left: per-seed cosine similarity (dots) and median (line)
  const x = (p) => pad + p / 0.9 * w, y = (v) => pad + (1 - (v + 1) / 2) * h;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "rgba(40,90,200,0.25)";
  res.cosine.forEach((col, i) => col.forEach((v) => ctx.fillRect(x(res.grid[i]) - 2, y(v) - 2, 4, 4)));
  ctx.strokeStyle = "#c33";
  ctx.beginPath();
  res.median.forEach((m, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(res.grid[i]), y(m)));
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.fillText("cosine to p=0 sample vs p", pad, pad - 8);
  ctx.fillText("1", pad - 14, y(1) + 4);
  ctx.fillText("-1", pad - 18, y(-1) + 4);
  ctx.fillText("0", x(0) - 3, pad + h + 14);
  ctx.fillText("0.9", x(0.9) - 8, pad + h + 14);
  // right: training loss
  const x0 = c.width / 2 + pad, loss = res.loss;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(x0, pad, w, h);
  if (loss.length) {
    const hi = Math.max(...loss), lo = Math.min(...loss);
    ctx.strokeStyle = "#283";
    ctx.beginPath();
    loss.forEach((l, i) => {
      const px = x0 + (i / Math.max(1, loss.length - 1)) * w;
      const py = pad + (1 - (l - lo) / Math.max(1e-12, hi - lo)) * h;
      (i ? ctx.lineTo : ctx.moveTo).call(ctx, px, py);
    });
    ctx.stroke();
    ctx.fillStyle = "#222";
    ctx.fillText(`training loss ${hi.toFixed(2)} → ${loss[loss.length - 1].toFixed(2)}`, x0, pad - 8);
  }
}

function runSweep() {
  $("sweep-status").textContent = "training...";
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const res = call(noise_sweep, $("sweep-cat").value, +$("sweep-steps").value, +$("sweep-sigma").value,
        +$("sweep-seeds").value, 0n);
      const secs = ((performance.now() - t0) / 1000).toFixed(1);
      $("sweep-status").textContent = `"${res.prompt}": Spearman rho ${res.spearman.toFixed(3)} (${secs}s)`;
      drawSweep(res);
    } catch (e) {
      $("sweep-status").textContent = e.message;
    }
  }, 10);
}

await init();
for (const c of CATEGORIES) $("sweep-cat").insertAdjacentHTML("beforeend", `<option>${c}</option>`);
for (const id of ["aug-prompt", "aug-mode", "aug-p", "aug-mu", "aug-sigma", "aug-seed"]) $(id).addEventListener("input", runAugment);
$("typo-run").addEventListener("click", runTypos);
$("sweep-run").addEventListener("click", runSweep);
runAugment();
runTypos();
