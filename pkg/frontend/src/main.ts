import { LabelApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = new LabelApp({ root });
  void app.start();
}
