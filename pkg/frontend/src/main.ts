// Editor bootstrap: pick a session, render composite/preview/heatmaps,
// and keep sliders in sync with the server through the edit queue.

import { ApiClient, type EditDelta, type Region, type SessionInfo, type Which } from "./api.js";
import {
	initialState,
	applyAck,
	undoAck,
	sliderBounds,
	sliderValue,
	type SessionState,
} from "./session.js";
import { SliderSync, type SliderTarget } from "./queue.js";
import { maskStrip, previewPane, regionList, sliderRow, toast, type SliderRowHandle } from "./components.js";

const api = new ApiClient("");

async function chooseSession(): Promise<string | null> {
	const fromQuery = new URLSearchParams(location.search).get("session");
	if (fromQuery) return fromQuery;
	const ids = await api.listSessions();
	return ids[0] ?? null;
}

function mount(root: HTMLElement, info: SessionInfo): void {
	let state: SessionState = initialState(info);
	let activeRegion: Region = "all";
	let bust = 0;

	const sync = new SliderSync(
		(edit: EditDelta) => api.edit(info.id, edit),
		(edit) => {
			state = applyAck(state, edit);
			void refreshImages();
		},
		(target: SliderTarget, appliedValue) => {
			toast(`edit failed; slider reverted`, "error");
			handles.get(`${target.channel}:${target.which}`)?.set(appliedValue);
		},
	);
	// seed cumulative values from the server-reported history
	for (const channel of info.channels) {
		for (const which of ["mul", "add"] as Which[]) {
			for (const region of ["all" as Region, ...info.regions.map((r) => r.label)]) {
				sync.primeApplied({ region, channel, which }, sliderValue(state, region, channel, which));
			}
		}
	}

	const preview = previewPane("harmonized preview");
	const compositeImg = document.createElement("img");
	compositeImg.alt = "composite input";
	compositeImg.src = api.compositeUrl(info.id);
	const masks = maskStrip(info.channels);

	async function refreshImages(): Promise<void> {
		bust += 1;
		masks.refresh((which, channel) => api.maskUrl(info.id, which, channel, bust));
		await preview.refresh(api.previewUrl(info.id, bust));
	}

	const handles = new Map<string, SliderRowHandle>();
	const sliderBox = document.createElement("div");
	sliderBox.className = "sliders";

	function renderSliders(): void {
		sliderBox.replaceChildren();
		handles.clear();
		for (const which of ["add", "mul"] as Which[]) {
			for (const channel of info.channels) {
				const bounds = sliderBounds(info.space, channel, which);
				const handle = sliderRow({
					label: `${channel} ${which}`,
					bounds,
					value: sliderValue(state, activeRegion, channel, which),
					onInput: (value) =>
						sync.setTarget({ region: activeRegion, channel, which, value }),
				});
				handles.set(`${channel}:${which}`, handle);
				sliderBox.append(handle.element);
			}
		}
	}

	const regions = regionList(
		info,
		(region) => {
			activeRegion = region;
			regions.setActive(region);
			renderSliders();
		},
		(label) => api.regionThumbUrl(info.id, label),
	);
	regions.setActive(activeRegion);

	const undoBtn = document.createElement("button");
	undoBtn.textContent = "undo";
	undoBtn.addEventListener("click", async () => {
		if (state.history.length === 0) return;
		try {
			await api.undo(info.id);
			const undone = state.history[state.history.length - 1];
			state = undoAck(state);
			sync.primeApplied(
				{ region: undone.region, channel: undone.channel, which: undone.op },
				sliderValue(state, undone.region, undone.channel, undone.op),
			);
			renderSliders();
			await refreshImages();
		} catch {
			toast("undo failed", "error");
		}
	});

	const exportBtn = document.createElement("button");
	exportBtn.textContent = "export masks";
	exportBtn.addEventListener("click", async () => {
		try {
			await sync.flush();
			const result = await api.exportMasks(info.id);
			toast(`exported to ${result.omsk}`);
		} catch (err) {
			toast(`export failed: ${err}`, "error");
		}
	});

	const bar = document.createElement("div");
	bar.className = "toolbar";
	const title = document.createElement("h1");
	title.textContent = `session ${info.id} (${info.space})`;
	bar.append(title, undoBtn, exportBtn);

	const panes = document.createElement("div");
	panes.className = "panes";
	const left = document.createElement("figure");
	left.append(compositeImg, captioned("composite"));
	const right = document.createElement("figure");
	right.append(preview.element, captioned("preview"));
	panes.append(left, right);

	root.replaceChildren(bar, panes, regions.element, sliderBox, masks.element);
	renderSliders();
	void refreshImages();
}

function captioned(text: string): HTMLElement {
	const cap = document.createElement("figcaption");
	cap.textContent = text;
	return cap;
}

async function boot(): Promise<void> {
	const root = document.getElementById("app");
	if (!root) return;
	try {
		const sid = await chooseSession();
		if (!sid) {
			root.textContent = "no sessions found under the service root";
			return;
		}
		mount(root, await api.session(sid));
	} catch (err) {
		root.textContent = `failed to load session: ${err}`;
	}
}

void boot();
