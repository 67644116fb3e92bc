import { ApiClient } from './api.js';
import { mountApp } from './app.js';

const params = new URLSearchParams(window.location.search);
const baseUrl =
  params.get('api') ?? localStorage.getItem('ktrlf-api') ?? 'http://127.0.0.1:8787';
localStorage.setItem('ktrlf-api', baseUrl);

const root = document.getElementById('app');
if (!root) throw new Error('missing #app element');
mountApp(root, new ApiClient(baseUrl));
