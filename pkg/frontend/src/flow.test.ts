import { describe, expect, it, vi } from 'vitest';

import { AskResponse, ServiceError } from './api';
import { performAsk } from './flow';
import { initialState, SessionState } from './state';

function readyState(): SessionState {
  return {
    ...initialState(),
    online: true,
    imageName: 'scan.png',
    imageBase64: 'aGVsbG8=',
    question: 'Is there a mass?',
  };
}

const response: AskResponse = {
  answer: 'yes',
  qtype: 'yes_no',
  margin: 0.8,
  step_confidences: [0.92],
  latency_ms: 20,
};

describe('performAsk', () => {
  it('sends the question with the image and appends exactly one entry', async () => {
    const askFn = vi.fn().mockResolvedValue(response);
    const outcome = await performAsk(readyState(), askFn);
    expect(outcome.sent).toBe(true);
    expect(askFn).toHaveBeenCalledTimes(1);
    expect(askFn).toHaveBeenCalledWith({ question: 'Is there a mass?', image: 'aGVsbG8=' });
    expect(outcome.state.history).toHaveLength(1);
    expect(outcome.state.history[0].answer).toBe('yes');
    expect(outcome.state.pending).toBe(false);
  });

  it('never sends with an empty question', async () => {
    const askFn = vi.fn();
    const outcome = await performAsk({ ...readyState(), question: '   ' }, askFn);
    expect(outcome.sent).toBe(false);
    expect(askFn).not.toHaveBeenCalled();
    expect(outcome.state.history).toHaveLength(0);
  });

  it('never sends without an image', async () => {
    const askFn = vi.fn();
    const outcome = await performAsk({ ...readyState(), imageBase64: null }, askFn);
    expect(outcome.sent).toBe(false);
    expect(askFn).not.toHaveBeenCalled();
  });

  it('never sends while offline or while another ask is pending', async () => {
    const askFn = vi.fn();
    expect((await performAsk({ ...readyState(), online: false }, askFn)).sent).toBe(false);
    expect((await performAsk({ ...readyState(), pending: true }, askFn)).sent).toBe(false);
    expect(askFn).not.toHaveBeenCalled();
  });

  it('surfaces 503 as a retryable inline error and leaves history unchanged', async () => {
    const askFn = vi.fn().mockRejectedValue(new ServiceError(503, 'model not loaded yet'));
    const outcome = await performAsk(readyState(), askFn);
    expect(outcome.state.history).toHaveLength(0);
    expect(outcome.state.lastError).not.toBeNull();
    expect(outcome.state.lastError?.retryable).toBe(true);
    expect(outcome.state.lastError?.message).toBe('model not loaded yet');
  });

  it('surfaces other service errors as non-retryable cards', async () => {
    const askFn = vi.fn().mockRejectedValue(new ServiceError(422, 'undecodable image'));
    const outcome = await performAsk(readyState(), askFn);
    expect(outcome.state.history).toHaveLength(0);
    expect(outcome.state.lastError?.retryable).toBe(false);
  });

  it('a successful ask after an error clears the error card', async () => {
    const failing = vi.fn().mockRejectedValue(new ServiceError(503, 'warming up'));
    const failed = await performAsk(readyState(), failing);
    const askFn = vi.fn().mockResolvedValue(response);
    const recovered = await performAsk({ ...failed.state }, askFn);
    expect(recovered.state.lastError).toBeNull();
    expect(recovered.state.history).toHaveLength(1);
  });
});
