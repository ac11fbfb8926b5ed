import { ApiClient } from "./client.js";
import { DeliveryJson } from "./types.js";

export const FEED_POLL_MS = 2000;

/** Since-cursor feed poller.  The cursor is the highest event id rendered so
 * far, so a delivery can never be fetched — or rendered — twice. */
export class FeedPoller {
  private cursor = 0;
  private seen = new Set<number>();
  private items: DeliveryJson[] = [];
  private unseenCount = 0;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private client: ApiClient) {}

  async tick(): Promise<DeliveryJson[]> {
    const fresh = await this.client.feed(this.cursor);
    const added: DeliveryJson[] = [];
    for (const delivery of fresh) {
      const id = delivery.event.event_id;
      if (this.seen.has(id)) continue;
      this.seen.add(id);
      this.items.push(delivery);
      this.cursor = Math.max(this.cursor, id);
      added.push(delivery);
    }
    this.unseenCount += added.length;
    return added;
  }

  /** Deliveries in arrival (event-id) order, newest last. */
  entries(): DeliveryJson[] {
    return [...this.items];
  }

  badge(): number {
    return this.unseenCount;
  }

  markSeen(): void {
    this.unseenCount = 0;
  }

  start(onUpdate: () => void, intervalMs = FEED_POLL_MS): void {
    this.stop();
    this.timer = setInterval(async () => {
      const added = await this.tick();
      if (added.length > 0) onUpdate();
    }, intervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }
}
