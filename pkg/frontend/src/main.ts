import { ask, fileToBase64, health } from './api';
import { performAsk } from './flow';
import { canAsk, initialState, renderError, renderHistory, SessionState } from './state';

let state: SessionState = initialState();

const imageInput = document.getElementById('image-input') as HTMLInputElement;
const preview = document.getElementById('preview') as HTMLImageElement;
const questionInput = document.getElementById('question-input') as HTMLInputElement;
const askButton = document.getElementById('ask-button') as HTMLButtonElement;
const historyBox = document.getElementById('history') as HTMLElement;
const errorBox = document.getElementById('error') as HTMLElement;
const statusBox = document.getElementById('status') as HTMLElement;

function setState(next: SessionState): void {
  state = next;
  render();
}

function render(): void {
  askButton.disabled = !canAsk(state);
  historyBox.innerHTML = renderHistory(state);
  errorBox.innerHTML = renderError(state);
  statusBox.textContent = state.online ? 'service online' : 'service unavailable';
  statusBox.className = state.online ? 'online' : 'offline';
  const retry = errorBox.querySelector<HTMLButtonElement>('button.retry');
  if (retry) {
    retry.addEventListener('click', () => {
      questionInput.value = retry.dataset.question ?? '';
      setState({ ...state, question: questionInput.value });
      void submit();
    });
  }
}

async function submit(): Promise<void> {
  if (!canAsk(state)) return;
  setState({ ...state, pending: true });
  const outcome = await performAsk({ ...state, pending: false }, ask);
  setState(outcome.state);
}

imageInput.addEventListener('change', async () => {
  const file = imageInput.files?.[0];
  if (!file) return;
  const base64 = await fileToBase64(file);
  preview.src = `data:${file.type};base64,${base64}`;
  preview.hidden = false;
  setState({ ...state, imageName: file.name, imageBase64: base64 });
});

questionInput.addEventListener('input', () => {
  setState({ ...state, question: questionInput.value });
});

questionInput.addEventListener('keydown', (event) => {
  if (event.key === 'Enter') void submit();
});

askButton.addEventListener('click', () => void submit());

async function pollHealth(): Promise<void> {
  try {
    const body = await health();
    setState({ ...state, online: body.status === 'ok' });
  } catch {
    setState({ ...state, online: false });
  }
}

void pollHealth();
setInterval(() => void pollHealth(), 5000);
