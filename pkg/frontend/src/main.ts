import { ApiClient } from "./api.js";
import { Controller, Views } from "./controller.js";
import { column, histogram, nearestSweepIndex, scatterPixels, sharedExtent, sweepGrid, sweepLayout } from "./render.js";
import { paramNames, serverFromQuery, SessionState } from "./state.js";
import { SampleResponse, SweepResponse } from "./types.js";

const CURRENT_COLOR = "#1f77b4";
const PINNED_COLOR = "#ff7f0e";

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node as T;
}

function buildSliders(state: SessionState, host: HTMLElement): void {
    for (const b of state.bounds) {
        const row = document.createElement("div");
        row.className = "slider-row";
        const label = document.createElement("label");
        label.textContent = b.name;
        const slider = document.createElement("input");
        slider.type = "range";
        slider.min = String(b.lower);
        slider.max = String(b.upper);
        slider.step = String((b.upper - b.lower) / 200);
        slider.value = String(state.psi[b.name]);
        const box = document.createElement("input");
        box.type = "number";
        box.value = String(state.psi[b.name]);
        box.step = "any";
        const sync = (v: number) => {
            state.setComponent(b.name, v);
            // reflect the clamped value back into both widgets
            slider.value = String(state.psi[b.name]);
            box.value = String(state.psi[b.name]);
        };
        slider.addEventListener("input", () => sync(Number(slider.value)));
        box.addEventListener("change", () => sync(Number(box.value)));
        row.append(label, slider, box);
        host.append(row);
    }
}

function drawScatter(canvas: HTMLCanvasElement, hx: HTMLCanvasElement, hy: HTMLCanvasElement,
                     resp: SampleResponse, pinned: SampleResponse | null, pair: [string, string]): void {
    const ctx = canvas.getContext("2d")!;
    const w = canvas.width;
    const h = canvas.height;
    ctx.clearRect(0, 0, w, h);
    const x = column(resp.rows, resp.columns, pair[0]);
    const y = column(resp.rows, resp.columns, pair[1]);
    const px = pinned ? column(pinned.rows, pinned.columns, pair[0]) : undefined;
    const py = pinned ? column(pinned.rows, pinned.columns, pair[1]) : undefined;
    const ext = sharedExtent(x, y, px, py);
    const drawCloud = (xs: number[], ys: number[], color: string) => {
        ctx.fillStyle = color;
        ctx.globalAlpha = 0.45;
        for (const [cx, cy] of scatterPixels(xs, ys, ext, w, h)) {
            ctx.beginPath();
            ctx.arc(cx, cy, 2, 0, 2 * Math.PI);
            ctx.fill();
        }
        ctx.globalAlpha = 1;
    };
    drawCloud(x, y, CURRENT_COLOR);
    if (px && py) drawCloud(px, py, PINNED_COLOR);

    const drawHist = (c: HTMLCanvasElement, vals: number[], pvals: number[] | undefined, lo: number, hi: number) => {
        const g = c.getContext("2d")!;
        g.clearRect(0, 0, c.width, c.height);
        const bins = 40;
        const draw = (counts: number[], color: string) => {
            const peak = Math.max(...counts, 1);
            g.fillStyle = color;
            g.globalAlpha = 0.6;
            const bw = c.width / bins;
            counts.forEach((n, i) => {
                const bh = (n / peak) * c.height;
                g.fillRect(i * bw, c.height - bh, bw - 1, bh);
            });
            g.globalAlpha = 1;
        };
        draw(histogram(vals, bins, lo, hi), CURRENT_COLOR);
        if (pvals) draw(histogram(pvals, bins, lo, hi), PINNED_COLOR);
    };
    drawHist(hx, x, px, ext.xMin, ext.xMax);
    drawHist(hy, y, py, ext.yMin, ext.yMax);
}

async function boot(): Promise<void> {
    const server = serverFromQuery(window.location.search, window.location.origin);
    const client = await ApiClient.connect(server);
    const state = new SessionState(server, client.meta);

    buildSliders(state, el("sliders"));

    const names = paramNames(client.meta);
    for (const [selId, idx] of [["pair-x", 0], ["pair-y", 1]] as const) {
        const sel = el<HTMLSelectElement>(selId);
        for (const n of names) {
            const o = document.createElement("option");
            o.value = n;
            o.textContent = n;
            sel.append(o);
        }
        sel.value = state.scatterPair[idx];
        sel.addEventListener("change", () => {
            state.setScatterPair(el<HTMLSelectElement>("pair-x").value, el<HTMLSelectElement>("pair-y").value);
        });
    }

    const critSel = el<HTMLSelectElement>("criterion");
    for (const c of client.meta.criteria) {
        const o = document.createElement("option");
        o.value = c;
        o.textContent = c;
        critSel.append(o);
    }
    critSel.addEventListener("change", () => state.setCriterion(critSel.value));

    let lastSweep: SweepResponse | null = null;
    const views: Views = {
        showSamples: (cur, pinned) => {
            drawScatter(el("scatter"), el("hist-x"), el("hist-y"), cur, pinned, state.scatterPair);
            const legend = el("legend");
            if (pinned && state.pinned) {
                const fmt = (p: Record<string, number>) =>
                    Object.entries(p).map(([k, v]) => `${k}=${v.toFixed(3)}`).join(" ");
                legend.innerHTML =
                    `<span style="color:${CURRENT_COLOR}">current ${fmt(state.psi)}</span> ` +
                    `<span style="color:${PINNED_COLOR}">pinned ${fmt(state.pinned)}</span>`;
            } else {
                legend.textContent = "";
            }
        },
        showCriterion: (value, stderr) => {
            el("criterion-value").textContent = `${state.criterion}: ${value.toFixed(4)} ± ${stderr.toFixed(4)}`;
        },
        showSweep: (resp, current) => {
            lastSweep = resp;
            const canvas = el<HTMLCanvasElement>("sweep");
            const g = canvas.getContext("2d")!;
            g.clearRect(0, 0, canvas.width, canvas.height);
            const values = resp.points.map((p) => p.value);
            const losses = resp.points.map((p) => p.loss);
            const layout = sweepLayout(values, losses, current, canvas.width, canvas.height);
            g.strokeStyle = CURRENT_COLOR;
            g.beginPath();
            layout.polyline.forEach(([x, y], i) => (i === 0 ? g.moveTo(x, y) : g.lineTo(x, y)));
            g.stroke();
            if (layout.marker) {
                g.fillStyle = PINNED_COLOR;
                g.beginPath();
                g.arc(layout.marker[0], layout.marker[1], 4, 0, 2 * Math.PI);
                g.fill();
            }
        },
        showError: (message) => {
            const toast = el("toast");
            toast.textContent = message;
            toast.classList.add("visible");
            setTimeout(() => toast.classList.remove("visible"), 4000);
        },
        showFooter: (text) => {
            el("footer").textContent = text;
        },
    };

    const controller = new Controller(client, state, views);

    el("pin").addEventListener("click", () => state.pin());
    el("unpin").addEventListener("click", () => state.unpin());
    el("reroll").addEventListener("click", () => state.reroll());

    el("run-sweep").addEventListener("click", () => {
        const component = el<HTMLSelectElement>("sweep-axis").value;
        const b = state.bounds.find((x) => x.name === component)!;
        void controller.runSweep(component, sweepGrid(b.lower, b.upper, 21));
    });
    const axisSel = el<HTMLSelectElement>("sweep-axis");
    for (const b of state.bounds) {
        const o = document.createElement("option");
        o.value = b.name;
        o.textContent = b.name;
        axisSel.append(o);
    }

    el<HTMLCanvasElement>("sweep").addEventListener("mousemove", (ev) => {
        if (!lastSweep) return;
        const canvas = el<HTMLCanvasElement>("sweep");
        const rect = canvas.getBoundingClientRect();
        const values = lastSweep.points.map((p) => p.value);
        const i = nearestSweepIndex(values, ev.clientX - rect.left, canvas.width);
        const p = lastSweep.points[i];
        el("sweep-hover").textContent = `${lastSweep.component}=${p.value.toFixed(4)}  loss=${p.loss.toFixed(4)}`;
    });

    el("title").textContent = `${client.meta.model} (${client.meta.kind})`;
    views.showFooter(state.footer(client.meta.checksum));
    await controller.refresh();
}

boot().catch((err) => {
    const toast = document.getElementById("toast");
    if (toast) {
        toast.textContent = `failed to start: ${err instanceof Error ? err.message : err}`;
        toast.classList.add("visible");
    }
});
