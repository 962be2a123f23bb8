package org.demo;

import java.util.List;

public class Orders {
    public int total(List<Integer> xs) {
        int s = 0;
        for (int x : xs) {
            s += x;
        }
        return s;
    }

    public boolean valid(int a, int b, int c, int d) {
        if (a > 0 && b > 0 && c > 0 && d > 0) {
            return true;
        }
        return false;
    }

    public String grade(int score) {
        if (score >= 90) {
            return "A";
        } else if (score >= 80) {
            return "B";
        } else if (score >= 70) {
            return "C";
        } else if (score >= 60) {
            return "D";
        }
        return "F";
    }

    public int classify(int code) {
        switch (code) {
            case 1: return 10;
            case 2: return 20;
            case 3: return 30;
            case 4: return 40;
            case 5: return 50;
            case 6: return 60;
            case 7: return 70;
            case 8: return 80;
            default: return 0;
        }
    }

    public int pick(int a, int b) {
        return a > b ? a : b;
    }

    public int countDown(int n) {
        int steps = 0;
        do {
            n--;
            steps++;
        } while (n > 0 && steps < 100);
        return steps;
    }

    public int parse(String s) {
        try {
            return Integer.parseInt(s);
        } catch (NumberFormatException e) {
            return -1;
        } catch (RuntimeException e) {
            return -2;
        } finally {
            log("parsed");
        }
    }

    public String describe(int n) {
        // if while for && || should be ignored here
        String text = "if (a && b || c) while for";
        char q = '?';
        /* case 1: catch */
        return text + q + n;
    }
}
