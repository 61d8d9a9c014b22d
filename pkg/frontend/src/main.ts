import { EditorApp } from './app.js';
import { ServiceClient } from './client.js';

// service origin is overridable per tab: index.html?service=http://host:port
const params = new URLSearchParams(window.location.search);
const base = params.get('service') ?? 'http://127.0.0.1:8765';

const root = document.getElementById('app');
if (root) {
  new EditorApp(root, new ServiceClient(base));
}
