/** Entry point: mount the editor against the service named by ?api=. */

import { mountEditor } from "./app";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8000";
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
mountEditor(root, baseUrl);
