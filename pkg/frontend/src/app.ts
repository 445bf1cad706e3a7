import { ApiClient, ApiError } from "./api.js";
import { attributeDeltas } from "./compare.js";
import { History, QueryDraft } from "./draft.js";
import { createAttributePanel, PanelHandle } from "./panel.js";
import { GenerateResponse, HistoryEntry } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className?: string,
    text?: string,
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
}

function formatTag(response: GenerateResponse): string {
    const params = response.tag.params.map((p) => p.toFixed(3)).join(", ");
    return `${response.tag.model_id}(${params}) seed=${response.tag.seed}`;
}

class App {
    private readonly client: ApiClient;
    private draft!: QueryDraft;
    private readonly history = new History();
    private panel!: PanelHandle;
    private compareSelection: number[] = [];

    private readonly generateButton = el("button", "generate-button", "Generate");
    private readonly statusLine = el("div", "status-line");
    private readonly resultView = el("div", "result-view");
    private readonly historyStrip = el("div", "history-strip");
    private readonly compareView = el("div", "compare-view");

    constructor(private readonly rootElement: HTMLElement, client?: ApiClient) {
        const base = new URLSearchParams(location.search).get("api") ?? "";
        this.client = client ?? new ApiClient(base);
    }

    async start(): Promise<void> {
        try {
            const attributes = await this.client.getAttributes();
            this.draft = new QueryDraft(attributes.map((a) => a.name));
            this.layout(attributes);
        } catch (err) {
            this.renderRetryBanner(err);
        }
    }

    private renderRetryBanner(err: unknown): void {
        this.rootElement.replaceChildren();
        const banner = el("div", "retry-banner");
        banner.append(
            el("p", undefined, `Could not load the attribute vocabulary: ${err}`),
        );
        const retry = el("button", undefined, "Retry");
        retry.addEventListener("click", () => void this.start());
        banner.appendChild(retry);
        this.rootElement.appendChild(banner);
    }

    private layout(attributes: Parameters<typeof createAttributePanel>[0]): void {
        this.rootElement.replaceChildren();

        const left = el("div", "pane pane-left");
        this.panel = createAttributePanel(attributes, this.draft, () =>
            this.syncControls(),
        );
        left.appendChild(this.panel.root);

        const controls = el("div", "controls");
        this.generateButton.addEventListener("click", () => void this.submit());
        const clear = el("button", undefined, "Clear");
        clear.addEventListener("click", () => {
            this.draft.clear();
            this.panel.refresh();
            this.syncControls();
        });
        controls.append(this.generateButton, clear);
        left.appendChild(controls);

        const right = el("div", "pane pane-right");
        right.append(this.statusLine, this.resultView,
                     el("h3", undefined, "History"), this.historyStrip,
                     this.compareView);

        this.rootElement.append(left, right);
        this.syncControls();
    }

    private syncControls(): void {
        this.generateButton.disabled = !this.draft.canSubmit();
    }

    private async submit(): Promise<void> {
        const request = this.draft.buildRequest();
        this.statusLine.textContent = "generating…";
        try {
            const response = await this.client.generate(request);
            const entry = this.history.add(request, response);
            this.statusLine.textContent = "";
            this.renderResult(response);
            this.renderHistory();
            void entry;
        } catch (err) {
            if (err instanceof DOMException && err.name === "AbortError") {
                return; // replaced by a newer request
            }
            if (err instanceof ApiError) {
                this.statusLine.textContent = `request rejected: ${err.message}`;
            } else {
                this.statusLine.textContent = `network error: ${err}`;
            }
        }
    }

    private renderResult(response: GenerateResponse): void {
        this.resultView.replaceChildren();
        const img = el("img", "texture-image") as HTMLImageElement;
        img.src = this.client.textureUrl(response.image_url);
        img.alt = formatTag(response);

        const meta = el("div", "result-meta");
        meta.append(
            el("div", "tag-summary", formatTag(response)),
            el(
                "div",
                "mse-badge",
                `closed-loop MSE ${response.closed_loop_mse.toFixed(4)}`,
            ),
            el(
                "div",
                undefined,
                `nearest neighbor #${response.neighbor_id} at distance ` +
                    `${response.neighbor_distance.toExponential(2)}`,
            ),
        );

        const gallery = el("div", "neighbor-gallery");
        for (const n of response.neighbors) {
            gallery.appendChild(
                el("div", "neighbor-chip", `#${n.id} ${n.model_id} d=${n.distance.toFixed(4)}`),
            );
        }
        this.resultView.append(img, meta, gallery);
    }

    private renderHistory(): void {
        this.historyStrip.replaceChildren();
        this.history.all().forEach((entry, index) => {
            const card = el("div", "history-card");
            const thumb = el("img", "history-thumb") as HTMLImageElement;
            thumb.src = this.client.textureUrl(entry.response.image_url);
            thumb.title = formatTag(entry.response);
            thumb.addEventListener("click", () => {
                this.draft.restore(entry);
                this.panel.refresh();
                this.syncControls();
                this.renderResult(entry.response);
            });

            const pick = el("input") as HTMLInputElement;
            pick.type = "checkbox";
            pick.title = "select for comparison";
            pick.addEventListener("change", () => {
                if (pick.checked) this.compareSelection.push(index);
                else this.compareSelection = this.compareSelection.filter((i) => i !== index);
                this.renderCompare();
            });

            card.append(thumb, el("span", "history-mse",
                entry.response.closed_loop_mse.toFixed(3)), pick);
            this.historyStrip.appendChild(card);
        });
    }

    private renderCompare(): void {
        this.compareView.replaceChildren();
        if (this.compareSelection.length < 2) return;
        const [ia, ib] = this.compareSelection.slice(-2);
        const a = this.history.at(ia);
        const b = this.history.at(ib);

        this.compareView.append(el("h3", undefined, "Compare"));
        const pair = el("div", "compare-pair");
        for (const entry of [a, b]) {
            const img = el("img", "compare-image") as HTMLImageElement;
            img.src = this.client.textureUrl(entry.response.image_url);
            pair.appendChild(img);
        }
        this.compareView.appendChild(pair);

        const table = el("table", "delta-table");
        const header = el("tr");
        for (const t of ["attribute", "from", "to", "delta"]) {
            header.appendChild(el("th", undefined, t));
        }
        table.appendChild(header);
        for (const row of attributeDeltas(a.request.attributes, b.request.attributes)) {
            const tr = el("tr");
            tr.append(
                el("td", undefined, row.name),
                el("td", undefined, row.from.toFixed(2)),
                el("td", undefined, row.to.toFixed(2)),
                el("td", row.delta > 0 ? "delta-up" : "delta-down",
                   row.delta.toFixed(2)),
            );
            table.appendChild(tr);
        }
        this.compareView.appendChild(table);
    }
}

const root = document.getElementById("app");
if (root) {
    void new App(root).start();
}

export { App };
