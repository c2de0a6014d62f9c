#!/usr/bin/env python3
"""Writes data/fixtures/target_search.json: a captured search-results page
for "sparkling water" on a retail site, in snapshot format."""

import json
import pathlib

FOOTER_LINES = 102


def node(tag, attrs=None, text=None, visible=True, children=None, bounds=None):
    n = {"tag": tag, "attributes": attrs or {}, "visible": visible, "children": children or []}
    if text is not None:
        n["text"] = text
    if bounds is not None:
        n["bounds"] = bounds
    return n


def product(title, price, flavor, rating, reviews, y):
    return node("li", {"class": "product-card"}, children=[
        node("div", {"class": "image-wrap"}, children=[
            node("picture", children=[node("img", {"alt": ""})]),
            node("div", {"class": "badge"}, text="Sponsored", visible=False),
        ]),
        node("div", {"class": "details"}, children=[
            node("a", {"href": "/p/" + title.lower().replace(" ", "-")}, children=[
                node("span", {"class": "title"}, text=title),
            ], bounds={"x": 20, "y": y, "w": 300, "h": 24}),
            node("div", {"class": "price-row"}, children=[
                node("span", {"class": "price"}, text=price),
                node("span", {"class": "unit"}, text="  "),
            ]),
            node("div", {"class": "attrs"}, children=[
                node("span", text="Flavor: " + flavor),
                node("span", text="Rating: " + rating + " (" + reviews + " reviews)"),
            ]),
            node("div", {"class": "fulfillment"}, children=[
                node("span", text="Pickup today"),
                node("span", text="Same Day Delivery"),
                node("span", text="Shipping", visible=False),
            ]),
        ]),
        node("button", {"aria-label": "Add " + title + " to cart", "type": "button"},
             text="Add to cart", bounds={"x": 20, "y": y + 60, "w": 120, "h": 32}),
    ])


def hidden_modal():
    return node("div", {"class": "modal", "role": "dialog", "aria-label": "Sign in"}, visible=False, children=[
        node("h2", text="Sign in or create account"),
        node("input", {"name": "username"}),
        node("input", {"name": "password", "type": "password"}),
        node("button", text="Sign in"),
        node("button", {"aria-label": "Close"}),
        node("div", children=[node("span", text="Forgot password?"), node("a", {"href": "/reset"}, text="Reset")]),
    ])


def hidden_carousel():
    cards = []
    for i in range(6):
        cards.append(node("div", {"class": "rec"}, children=[
            node("a", {"href": "/rec/%d" % i}, text="Recommended item %d" % (i + 1)),
            node("button", {"aria-label": "Add recommended item %d" % (i + 1)}, text="Add"),
        ]))
    return node("section", {"class": "recs"}, visible=False, children=cards)


def build():
    header = node("header", {"class": "site-header"}, children=[
        node("a", {"aria-label": "Target home", "href": "/"}, children=[node("svg", {"class": "logo"})]),
        node("form", {"role": "search", "action": "/s"}, children=[
            node("input", {"name": "searchTerm", "type": "search", "value": "sparkling water",
                           "placeholder": "What can we help you find?"}),
            node("button", {"type": "submit"}, text="search"),
        ]),
        node("nav", {"class": "global-nav"}, children=[
            node("a", {"href": "/c/categories"}, text="Categories"),
            node("a", {"href": "/c/deals"}, text="Deals"),
        ]),
        node("a", {"href": "/cart", "aria-label": "cart 0 items"}, children=[node("svg", {"class": "cart"})]),
    ])

    sort_bar = node("div", {"class": "sort-bar"}, children=[
        node("label", text="Sort by"),
        node("select", {"name": "sortBy", "value": "relevance"}, children=[
            node("option", {"value": "relevance"}, text="Relevance"),
            node("option", {"value": "PriceLow"}, text="Price low to high"),
            node("option", {"value": "PriceHigh"}, text="Price high to low"),
        ]),
    ])

    products = node("ul", {"class": "results"}, children=[
        product("LaCroix Lime Sparkling Water 8pk", "$4.99", "Lime", "4.6", "2,310", 400),
        product("LaCroix Pamplemousse Sparkling Water 8pk", "$4.99", "Grapefruit", "4.7", "3,120", 520),
        product("LaCroix Pure Sparkling Water 8pk", "$4.99", "Pure", "4.4", "1,045", 640),
    ])

    main = node("main", children=[
        node("div", {"class": "crumbs"}, children=[node("span", text="Grocery"), node("span", text="Beverages")]),
        node("h1", text="Results for “sparkling water”"),
        sort_bar,
        products,
        hidden_carousel(),
    ])

    footer_lines = [node("div", {"class": "footer-line"}, text="   ") for _ in range(FOOTER_LINES)]
    footer = node("footer", children=[node("div", {"class": "legal"}, children=footer_lines)])

    return node("body", children=[
        node("div", {"class": "skip"}, text="\n  "),
        header,
        hidden_modal(),
        main,
        footer,
    ])


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures" / "target_search.json"
    out.write_text(json.dumps(build(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print(out)
