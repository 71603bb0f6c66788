import init, { Scenario, fundamentalDiagram } from "./pkg/shockwave_web.js";

const $ = (id) => document.getElementById(id);
let scenario = null;

function draw() {
  if (!scenario) return;
  for (const id of ["lane", "segment", "window"]) $(`${id}-v`).textContent = $(id).value;
  const view = Number($("view").value);
  let max = Number($("max").value);
  if (view === 0) max = 1;
  if (view === 2) max *= 528;
  try {
    const px = scenario.render(Number($("lane").value), Number($("segment").value), Number($("window").value), view, max);
    const image = new ImageData(new Uint8ClampedArray(px), 200, 200);
    $("heatmap").getContext("2d").putImageData(image, 0, 0);
  } catch (e) {
    $("status").textContent = String(e);
  }
}

function run() {
  $("status").textContent = "simulating...";
  setTimeout(() => {
    try {
      scenario?.free();
      scenario = new Scenario(Number($("seed").value), Number($("limit").value), Number($("inflow").value), Number($("slow").value));
      $("lane").max = scenario.lanes() - 1;
      $("segment").max = scenario.segments() - 1;
      $("window").max = scenario.windows() - 1;
      $("status").textContent = scenario.summary();
      draw();
    } catch (e) {
      $("status").textContent = String(e);
    }
  }, 0);
}

function plotDiagram() {
  const pts = fundamentalDiagram(Number($("fd-v").value), Number($("fd-t").value), Number($("fd-s").value), 400);
  const c = $("fd");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  let kMax = 0, qMax = 0;
  for (let i = 0; i < pts.length; i += 2) {
    kMax = Math.max(kMax, pts[i]);
    qMax = Math.max(qMax, pts[i + 1]);
  }
  const pad = 30;
  const x = (k) => pad + (k / kMax) * (c.width - 2 * pad);
  const y = (q) => c.height - pad - (q / qMax) * (c.height - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  g.fillStyle = "#222";
  g.fillText(`density (0-${kMax.toFixed(0)} vpm)`, pad, c.height - 8);
  g.fillText(`flow (max ${qMax.toFixed(0)} veh/h)`, pad, pad - 8);
  g.strokeStyle = "#d00";
  g.beginPath();
  for (let i = 0; i < pts.length; i += 2) {
    const [px, py] = [x(pts[i]), y(pts[i + 1])];
    i === 0 ? g.moveTo(px, py) : g.lineTo(px, py);
  }
  g.stroke();
}

await init();
$("run").addEventListener("click", run);
for (const id of ["lane", "segment", "window", "view", "max"]) $(id).addEventListener("input", draw);
for (const id of ["fd-v", "fd-t", "fd-s"]) $(id).addEventListener("input", plotDiagram);
plotDiagram();
run();
