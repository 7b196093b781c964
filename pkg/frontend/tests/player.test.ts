import { describe, expect, it } from "vitest";

import { AbPlayer, type AudioLike } from "../src/player.js";

class FakeAudio implements AudioLike {
  currentTime = 0;
  playing = false;
  constructor(public src: string) {}
  play() {
    this.playing = true;
  }
  pause() {
    this.playing = false;
  }
}

function makePlayer() {
  const created: FakeAudio[] = [];
  const player = new AbPlayer((src) => {
    const a = new FakeAudio(src);
    created.push(a);
    return a;
  });
  return { player, created };
}

describe("AbPlayer", () => {
  it("loads both the mixture and the extraction", () => {
    const { player, created } = makePlayer();
    player.load("/audio/mix-1", "/audio/est-1");
    expect(player.loaded).toBe(true);
    expect(created.map((a) => a.src)).toEqual(["/audio/mix-1", "/audio/est-1"]);
    expect(player.sources()).toEqual({
      mixture: "/audio/mix-1",
      extraction: "/audio/est-1",
    });
  });

  it("starts on the extraction and toggles to the mixture at the same playhead", () => {
    const { player, created } = makePlayer();
    player.load("/audio/mix-1", "/audio/est-1");
    const [mix, est] = created;
    expect(player.current).toBe("extraction");

    player.play();
    expect(est.playing).toBe(true);
    est.currentTime = 3.2;

    player.toggle();
    expect(player.current).toBe("mixture");
    expect(mix.currentTime).toBe(3.2);
    expect(mix.playing).toBe(true);
    expect(est.playing).toBe(false);
  });

  it("toggling while stopped only switches the selection", () => {
    const { player, created } = makePlayer();
    player.load("/audio/mix-1", "/audio/est-1");
    player.toggle();
    expect(player.current).toBe("mixture");
    expect(created.some((a) => a.playing)).toBe(false);
  });

  it("loading a new result stops and replaces the previous pair", () => {
    const { player, created } = makePlayer();
    player.load("/audio/mix-1", "/audio/est-1");
    player.play();
    player.load("/audio/mix-2", "/audio/est-2");
    expect(created[1].playing).toBe(false);
    expect(player.sources()).toEqual({
      mixture: "/audio/mix-2",
      extraction: "/audio/est-2",
    });
    expect(player.current).toBe("extraction");
  });
});
