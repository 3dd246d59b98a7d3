// Small DOM builders; no framework, no client-side color math.

import type { Region, SessionInfo, Which } from "./api.js";
import type { SliderBounds } from "./session.js";

export interface SliderRowProps {
	label: string;
	bounds: SliderBounds;
	value: number;
	onInput: (value: number) => void;
}

export interface SliderRowHandle {
	element: HTMLElement;
	set(value: number): void;
}

export function sliderRow(props: SliderRowProps): SliderRowHandle {
	const wrap = document.createElement("label");
	wrap.className = "slider-row";

	const title = document.createElement("span");
	title.textContent = props.label;

	const value = document.createElement("span");
	value.className = "mono";

	const input = document.createElement("input");
	input.type = "range";
	input.min = String(props.bounds.min);
	input.max = String(props.bounds.max);
	input.step = String(props.bounds.step);

	const render = (v: number) => {
		input.value = String(v);
		value.textContent = v.toFixed(3);
	};
	render(props.value);

	input.addEventListener("input", () => {
		const next = Number(input.value);
		value.textContent = next.toFixed(3);
		props.onInput(next);
	});

	wrap.append(title, value, input);
	return { element: wrap, set: render };
}

export interface PreviewPane {
	element: HTMLElement;
	/** Load the new URL off-screen and swap atomically once decoded. */
	refresh(url: string): Promise<void>;
}

export function previewPane(alt: string): PreviewPane {
	const box = document.createElement("div");
	box.className = "preview-pane";
	let current = document.createElement("img");
	current.alt = alt;
	box.append(current);

	return {
		element: box,
		async refresh(url: string): Promise<void> {
			const next = document.createElement("img");
			next.alt = alt;
			next.src = url;
			await next.decode().catch(() => undefined);
			box.replaceChild(next, current);
			current = next;
		},
	};
}

export function regionList(
	info: SessionInfo,
	onSelect: (region: Region) => void,
	thumbUrl?: (label: number) => string,
): { element: HTMLElement; setActive(region: Region): void } {
	const list = document.createElement("ul");
	list.className = "region-list";
	const items = new Map<string, HTMLLIElement>();

	const entries: Array<{ region: Region; text: string }> = [
		{ region: "all", text: "whole image" },
		...info.regions.map((r) => ({
			region: r.label as Region,
			text: `region ${r.label} (${r.area} px)`,
		})),
	];
	for (const { region, text } of entries) {
		const li = document.createElement("li");
		if (region !== "all" && thumbUrl) {
			const img = document.createElement("img");
			img.className = "region-thumb";
			img.src = thumbUrl(region as number);
			img.alt = "";
			li.append(img);
		}
		li.append(document.createTextNode(text));
		li.addEventListener("click", () => onSelect(region));
		items.set(String(region), li);
		list.append(li);
	}
	return {
		element: list,
		setActive(region: Region) {
			for (const [key, li] of items) {
				li.classList.toggle("active", key === String(region));
			}
		},
	};
}

export function toast(message: string, kind: "info" | "error" = "info"): void {
	const el = document.createElement("div");
	el.className = `toast ${kind}`;
	el.textContent = message;
	document.body.append(el);
	setTimeout(() => el.remove(), 4000);
}

export function maskStrip(channels: string[]): {
	element: HTMLElement;
	refresh(urlFor: (which: Which, channel: string) => string): void;
} {
	const strip = document.createElement("div");
	strip.className = "mask-strip";
	const imgs = new Map<string, HTMLImageElement>();
	for (const which of ["mul", "add"] as Which[]) {
		for (const channel of channels) {
			const fig = document.createElement("figure");
			const img = document.createElement("img");
			img.alt = `${which} ${channel}`;
			const cap = document.createElement("figcaption");
			cap.textContent = `${which} ${channel}`;
			fig.append(img, cap);
			strip.append(fig);
			imgs.set(`${which}:${channel}`, img);
		}
	}
	return {
		element: strip,
		refresh(urlFor) {
			for (const [key, img] of imgs) {
				const [which, channel] = key.split(":");
				img.src = urlFor(which as Which, channel);
			}
		},
	};
}
