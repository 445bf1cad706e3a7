import { QueryDraft } from "./draft.js";
import { AttributeInfo } from "./types.js";

export interface PanelHandle {
    root: HTMLElement;
    /** Push the draft's current values back into the sliders. */
    refresh(): void;
}

const AXIS_ORDER = ["X", "Y", "Z"];

function axisRank(axis: string): number {
    const i = AXIS_ORDER.indexOf(axis);
    return i === -1 ? AXIS_ORDER.length : i;
}

/**
 * 43 sliders grouped by the semantic-space axis each attribute correlates
 * with most, plus a substring filter box.
 */
export function createAttributePanel(
    attributes: AttributeInfo[],
    draft: QueryDraft,
    onChange: () => void,
): PanelHandle {
    const root = document.createElement("div");
    root.className = "attribute-panel";

    const filter = document.createElement("input");
    filter.type = "search";
    filter.placeholder = "filter attributes…";
    filter.className = "attribute-filter";
    root.appendChild(filter);

    const rows = new Map<string, { row: HTMLElement; slider: HTMLInputElement; readout: HTMLElement }>();

    const groups = new Map<string, AttributeInfo[]>();
    for (const info of attributes) {
        const list = groups.get(info.axis) ?? [];
        list.push(info);
        groups.set(info.axis, list);
    }
    const axes = [...groups.keys()].sort((a, b) => axisRank(a) - axisRank(b));

    for (const axis of axes) {
        const section = document.createElement("section");
        section.className = "axis-group";
        const heading = document.createElement("h3");
        heading.textContent = `${axis} axis`;
        section.appendChild(heading);

        for (const info of groups.get(axis)!) {
            const row = document.createElement("label");
            row.className = "attribute-row";

            const name = document.createElement("span");
            name.className = "attribute-name";
            name.textContent = info.name;

            const slider = document.createElement("input");
            slider.type = "range";
            slider.min = "0";
            slider.max = "1";
            slider.step = "0.01";
            slider.value = String(draft.get(info.name));

            const readout = document.createElement("span");
            readout.className = "attribute-value";
            readout.textContent = draft.get(info.name).toFixed(2);

            slider.addEventListener("input", () => {
                draft.set(info.name, Number(slider.value));
                readout.textContent = draft.get(info.name).toFixed(2);
                onChange();
            });

            row.append(name, slider, readout);
            section.appendChild(row);
            rows.set(info.name, { row, slider, readout });
        }
        root.appendChild(section);
    }

    filter.addEventListener("input", () => {
        const needle = filter.value.trim().toLowerCase();
        for (const [name, parts] of rows) {
            parts.row.style.display = name.includes(needle) ? "" : "none";
        }
    });

    return {
        root,
        refresh() {
            for (const [name, parts] of rows) {
                parts.slider.value = String(draft.get(name));
                parts.readout.textContent = draft.get(name).toFixed(2);
            }
        },
    };
}
