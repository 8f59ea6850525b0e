import init, { rank_systems, word_drop_demo, compare } from "./pkg/mtrank_wasm.js";

const $ = (id) => document.getElementById(id);

function call(fn, ...args) {
  const v = JSON.parse(fn(...args));
  if (v.error) throw new Error(v.error);
  return v;
}

function show(el, f) {
  try {
    el.classList.remove("error");
    f();
  } catch (e) {
    el.classList.add("error");
    el.textContent = e.message;
  }
}

// Win matrix

let systems = [];
let p = [];

function buildGrid() {
  systems = $("sys-names").value.split(",").map((s) => s.trim()).filter(Boolean);
  p = systems.map((_, i) => systems.map((_, j) => 0.5));
  if (systems.length === 3 && systems.join() === "A,B,C") {
    p = [[0.5, 0.7, 0.3], [0.3, 0.5, 0.4], [0.7, 0.6, 0.5]];
  }
  const grid = $("sys-grid");
  grid.innerHTML = "";
  const head = grid.insertRow();
  head.appendChild(document.createElement("th"));
  for (const s of systems) {
    const th = document.createElement("th");
    th.textContent = s;
    head.appendChild(th);
  }
  systems.forEach((s, i) => {
    const row = grid.insertRow();
    const th = document.createElement("th");
    th.textContent = s;
    row.appendChild(th);
    systems.forEach((_, j) => {
      const cell = row.insertCell();
      if (i === j) {
        cell.textContent = "-";
        return;
      }
      const input = document.createElement("input");
      input.type = "number";
      input.min = 0;
      input.max = 1;
      input.step = 0.05;
      input.id = `cell-${i}-${j}`;
      input.value = p[i][j];
      input.addEventListener("input", () => {
        const v = Number(input.value);
        p[i][j] = v;
        p[j][i] = Math.round((1 - v) * 1e6) / 1e6;
        $(`cell-${j}-${i}`).value = p[j][i];
        rankNow();
      });
      cell.appendChild(input);
    });
  });
  rankNow();
}

function rankNow() {
  const out = $("sys-out");
  show(out, () => {
    const r = call(rank_systems, JSON.stringify({ systems, p }), Number($("sys-threshold").value));
    const lines = r.scores.map((s, k) => `${k + 1}. ${s.system.padEnd(12)} ${s.score.toFixed(4)}`);
    if (r.inconsistency) {
      const inc = r.inconsistency;
      lines.push("", `inconsistent triples: ${inc.inconsistent}/${inc.total} (${inc.percentage.toFixed(2)}%)`);
      for (const t of inc.triples) lines.push(`  ${t.join(" > ")} > ${t[0]}`);
    }
    out.textContent = lines.join("\n");
  });
}

// Word drop

function dropNow() {
  const out = $("wd-out");
  show(out, () => {
    const text = $("wd-text").value;
    const r = call(word_drop_demo, text, Number($("wd-rate").value), Number($("wd-seed").value) >>> 0);
    out.innerHTML = "";
    text.split(/\s+/).filter(Boolean).forEach((tok, i) => {
      const span = document.createElement("span");
      span.textContent = tok + " ";
      if (!r.kept[i]) span.className = "dropped";
      out.appendChild(span);
    });
    const res = document.createElement("div");
    res.textContent = "\n" + r.perturbed;
    out.appendChild(res);
  });
}

// Pair comparison

function compareNow() {
  const out = $("cmp-out");
  show(out, () => {
    const r = call(compare, $("cmp-lang").value, $("cmp-src").value, $("cmp-t0").value, $("cmp-t1").value);
    const better = r.p > 0.5 ? "T1" : r.p < 0.5 ? "T0" : "neither";
    let html = `<p>P(T1 better) = ${r.p.toFixed(4)}, preferred: ${better}</p>`;
    html += '<table class="feat"><tr><th>feature</th><th>T0</th><th>T1</th><th>weight</th><th>contribution</th></tr>';
    for (const f of r.features) {
      const cls = f.contribution > 0 ? "pos" : f.contribution < 0 ? "neg" : "";
      html += `<tr><td>${f.name}</td><td>${f.t0.toFixed(3)}</td><td>${f.t1.toFixed(3)}</td>` +
        `<td>${f.weight.toFixed(3)}</td><td class="${cls}">${f.contribution.toFixed(3)}</td></tr>`;
    }
    out.innerHTML = html + "</table>";
  });
}

await init();
$("sys-reset").addEventListener("click", buildGrid);
$("sys-threshold").addEventListener("input", rankNow);
$("wd-run").addEventListener("click", dropNow);
$("cmp-run").addEventListener("click", compareNow);
buildGrid();
dropNow();
compareNow();
