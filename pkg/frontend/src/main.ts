import { ConsoleApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const url = params.get("ws") ?? "ws://127.0.0.1:8765";

const canvas = document.getElementById("console") as HTMLCanvasElement;
const status = document.getElementById("status") as HTMLElement;
new ConsoleApp(canvas, status).connect(url);
