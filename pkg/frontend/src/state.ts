// Session state and pure rendering. The DOM is derived from SessionState
// alone, so every transition is testable without touching the network.
// History is append-only and holds answered questions; transport errors
// surface as a transient inline card that never mutates history.

import { AskResponse } from './api';

export interface HistoryEntry {
  question: string;
  answer: string;
  qtype: 'yes_no' | 'others';
  margin: number;
  stepConfidences: number[];
  timestamp: number;
}

export interface InlineError {
  question: string;
  message: string;
  retryable: boolean;
}

export interface SessionState {
  imageName: string | null;
  imageBase64: string | null;
  question: string;
  pending: boolean;
  online: boolean;
  history: HistoryEntry[];
  lastError: InlineError | null;
}

export function initialState(): SessionState {
  return {
    imageName: null,
    imageBase64: null,
    question: '',
    pending: false,
    online: false,
    history: [],
    lastError: null,
  };
}

export function canAsk(state: SessionState): boolean {
  return (
    state.online &&
    !state.pending &&
    state.imageBase64 !== null &&
    state.question.trim().length > 0
  );
}

export function appendAnswer(
  state: SessionState,
  question: string,
  response: AskResponse,
  now = Date.now(),
): SessionState {
  const entry: HistoryEntry = {
    question,
    answer: response.answer,
    qtype: response.qtype,
    margin: response.margin,
    stepConfidences: response.step_confidences,
    timestamp: now,
  };
  return { ...state, history: [...state.history, entry], lastError: null };
}

export function setError(
  state: SessionState,
  question: string,
  message: string,
  retryable: boolean,
): SessionState {
  return { ...state, lastError: { question, message, retryable } };
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderEntry(entry: HistoryEntry): string {
  const badgeLabel = entry.qtype === 'yes_no' ? 'yes/no' : 'open';
  const confs =
    entry.qtype === 'others' && entry.stepConfidences.length
      ? `<div class="confidences">${entry.stepConfidences
          .map((c) => `<span class="conf">${(100 * c).toFixed(0)}%</span>`)
          .join('')}</div>`
      : '';
  return (
    `<div class="card answer-card"><div class="question">${escapeHtml(entry.question)}</div>` +
    `<span class="badge badge-${entry.qtype}">${badgeLabel}</span>` +
    `<div class="answer">${escapeHtml(entry.answer || '(empty answer)')}</div>${confs}</div>`
  );
}

export function renderHistory(state: SessionState): string {
  return state.history.map(renderEntry).join('');
}

export function renderError(state: SessionState): string {
  if (!state.lastError) return '';
  const retry = state.lastError.retryable
    ? `<button class="retry" data-question="${escapeHtml(state.lastError.question)}">retry</button>`
    : '';
  return (
    `<div class="card error-card"><div class="question">${escapeHtml(state.lastError.question)}</div>` +
    `<div class="error-message">${escapeHtml(state.lastError.message)}</div>${retry}</div>`
  );
}
