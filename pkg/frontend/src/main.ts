import { ApiClient } from "./api.js";
import { configFromLocation, mountApp } from "./app.js";

// ?api=http://127.0.0.1:8700&token=... ; defaults to same-origin
const root = document.getElementById("app");
if (root) {
  mountApp(root, { api: new ApiClient(configFromLocation(window.location)) });
}
