/**
 * Newline-delimited JSON client for the console backend socket.
 *
 * Requests are serialized (one in flight at a time); unsolicited `push`
 * lines are routed to the push handler instead of resolving a request.
 * `requestKeyed` attaches a unique msg_id so a retried or double-fired
 * command cannot execute twice on the backend.
 */

import * as net from "node:net";
import { randomUUID } from "node:crypto";
import type { BackendClient, PushMessage, Reply } from "./types.js";

interface PendingRequest {
  resolve: (reply: Reply) => void;
  reject: (err: Error) => void;
}

export class LineClient implements BackendClient {
  private socket: net.Socket | null = null;
  private buffer = "";
  private queue: PendingRequest[] = [];
  private sendQueue: Array<() => void> = [];
  private inFlight = false;
  private counter = 0;
  private readonly sessionId = randomUUID().slice(0, 8);

  onPush: ((msg: PushMessage) => void) | null = null;
  onClose: (() => void) | null = null;

  connect(port: number, host = "127.0.0.1"): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ port, host }, () => resolve());
      socket.setEncoding("utf8");
      socket.on("data", (chunk: string) => this.onData(chunk));
      socket.on("error", (err) => {
        this.failAll(err instanceof Error ? err : new Error(String(err)));
        reject(err);
      });
      socket.on("close", () => {
        this.failAll(new Error("connection closed"));
        this.onClose?.();
      });
      this.socket = socket;
    });
  }

  close(): void {
    this.socket?.end();
    this.socket?.destroy();
    this.socket = null;
  }

  nextMsgId(): string {
    this.counter += 1;
    return `${this.sessionId}-${this.counter}`;
  }

  request(type: string, payload: Record<string, unknown> = {}): Promise<Reply> {
    return this.send({ type, ...payload });
  }

  /** Request with an idempotency key (for anything that mutates state). */
  requestKeyed(
    type: string,
    payload: Record<string, unknown> = {},
  ): Promise<Reply> {
    return this.send({ type, msg_id: this.nextMsgId(), ...payload });
  }

  private send(msg: Record<string, unknown>): Promise<Reply> {
    if (!this.socket) {
      return Promise.reject(new Error("not connected"));
    }
    return new Promise<Reply>((resolve, reject) => {
      const fire = () => {
        this.inFlight = true;
        this.queue.push({ resolve, reject });
        this.socket!.write(JSON.stringify(msg) + "\n");
      };
      if (this.inFlight) {
        this.sendQueue.push(fire);
      } else {
        fire();
      }
    });
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let index: number;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index).trim();
      this.buffer = this.buffer.slice(index + 1);
      if (!line) continue;
      let parsed: Reply | PushMessage;
      try {
        parsed = JSON.parse(line);
      } catch {
        continue; // tolerate a mangled line rather than desync the stream
      }
      if ("push" in parsed) {
        this.onPush?.(parsed as PushMessage);
        continue;
      }
      const pending = this.queue.shift();
      if (pending) {
        pending.resolve(parsed as Reply);
        this.inFlight = this.queue.length > 0;
        const next = this.sendQueue.shift();
        if (next) next();
      }
    }
  }

  private failAll(err: Error): void {
    for (const pending of this.queue.splice(0)) {
      pending.reject(err);
    }
    this.sendQueue.length = 0;
    this.inFlight = false;
  }
}
