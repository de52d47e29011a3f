package org.acme.inventory.io;

import java.util.ArrayList;
import java.util.List;

final class Parser {
    private Parser() {
    }

    static String[] split(String line, char separator) {
        List<String> parts = new ArrayList<>();
        StringBuilder cur = new StringBuilder();
        boolean quoted = false;
        for (int i = 0; i < line.length(); i++) {
            char c = line.charAt(i);
            if (c == '"') {
                quoted = !quoted;
            } else if (c == separator && !quoted) {
                parts.add(cur.toString());
                cur.setLength(0);
            } else {
                cur.append(c);
            }
        }
        parts.add(cur.toString());
        return parts.toArray(new String[0]);
    }

    static int parseQuantity(String text) {
        switch (text.trim()) {
            case "":
                return 0;
            default:
                return Integer.parseInt(text.trim());
        }
    }
}
